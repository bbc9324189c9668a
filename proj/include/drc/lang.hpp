#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "drc/errors.hpp"
#include "drc/geometry.hpp"

namespace drc {

// Rule-script AST. Surface syntax, one statement per newline (newlines inside
// parentheses continue the statement):
//
//   m4  = input("met4")                 # bind a layout layer explicitly
//   gap = pad - m4                      # set algebra: & | - ^ (equal
//                                       # precedence, left associative)
//   pad.enclosed(m4, 0.850.um).output("PAD_ENC", "pad enclosure under 0.850um")
//
// Methods: sized(signed len), width(len), spacing(len), separation(expr, len)
// (alias: sep), enclosed(expr, len). Length literals: bare INT = nm, INT.nm,
// DECIMAL.um (whole-nm resolution; finer is a parse error). Identifiers not
// defined in the script bind as implicit input layers.

enum class CheckKind { Width, Spacing, Separation, Enclosed };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Layer, Binary, Sized, Check };
    Kind kind;

    std::string layer;       // Kind::Layer
    BoolOp op{};             // Kind::Binary
    ExprPtr lhs, rhs;        // Kind::Binary
    ExprPtr base;            // Kind::Sized / receiver of Kind::Check
    Coord delta = 0;         // Kind::Sized (signed, internal units)
    CheckKind check{};       // Kind::Check
    ExprPtr other;           // Kind::Check (separation/enclosed)
    Coord dist = 0;          // Kind::Check threshold (internal units, > 0)

    static ExprPtr make_layer(std::string name);
    static ExprPtr make_binary(BoolOp op, ExprPtr l, ExprPtr r);
    static ExprPtr make_sized(ExprPtr base, Coord delta);
    static ExprPtr make_check(CheckKind k, ExprPtr base, ExprPtr other, Coord dist);
};

bool expr_equal(const Expr& a, const Expr& b);

struct Stmt {
    enum class Kind { LayerDecl, Assign, Output };
    Kind kind;
    std::string name;         // LayerDecl/Assign target
    std::string source;       // LayerDecl source layer
    ExprPtr expr;             // Assign/Output
    std::string rule_name;    // Output
    std::string description;  // Output
    int line = 0;
};

struct ScriptAst {
    std::vector<Stmt> statements;
    bool operator==(const ScriptAst& o) const;
};

// Throws ParseError with 1-based line/column on malformed input.
ScriptAst parse(std::string_view text);

struct CheckedScript {
    ScriptAst ast;
    std::vector<std::string> input_layers;   // implicit refs + declared sources, sorted
    std::vector<std::string> defined_names;  // in definition order
};

// Validates name binding: no double definition, no use before definition.
// Throws SemanticError. Unknown identifiers become implicit input layers.
CheckedScript resolve(const ScriptAst& ast);

CheckedScript compile(std::string_view text);  // parse + resolve

// Canonical textual form; parse(pretty_print(ast)) reproduces the AST.
std::string pretty_print(const ScriptAst& ast);
std::string pretty_print(const Expr& e);

}  // namespace drc
