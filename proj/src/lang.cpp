#include "drc/lang.hpp"

#include <charconv>
#include <map>
#include <set>

namespace drc {

namespace {

enum class Tok {
    Ident,
    Number,
    String,
    LParen,
    RParen,
    Comma,
    Dot,
    Assign,
    Amp,
    Pipe,
    Minus,
    Caret,
    Newline,
    End
};

struct Token {
    Tok kind;
    std::string text;
    int line, col;
};

bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    size_t i = 0;
    int line = 1, col = 1, depth = 0;
    auto push = [&](Tok k, std::string text, int l, int c) {
        out.push_back(Token{k, std::move(text), l, c});
    };
    while (i < s.size()) {
        const char c = s[i];
        const int l = line, co = col;
        if (c == '\n') {
            if (depth == 0 && !out.empty() && out.back().kind != Tok::Newline) {
                push(Tok::Newline, "\n", l, co);
            }
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (c == '#') {
            while (i < s.size() && s[i] != '\n') ++i;
            continue;  // newline handled above
        }
        if (ident_start(c)) {
            size_t j = i;
            while (j < s.size() && ident_char(s[j])) ++j;
            push(Tok::Ident, std::string(s.substr(i, j - i)), l, co);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (digit(c)) {
            size_t j = i;
            while (j < s.size() && digit(s[j])) ++j;
            if (j < s.size() && s[j] == '.' && j + 1 < s.size() && digit(s[j + 1])) {
                ++j;
                while (j < s.size() && digit(s[j])) ++j;
            }
            push(Tok::Number, std::string(s.substr(i, j - i)), l, co);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (c == '"') {
            std::string text;
            size_t j = i + 1;
            int ccol = co + 1;
            while (true) {
                if (j >= s.size() || s[j] == '\n') throw ParseError(l, co, "unterminated string");
                if (s[j] == '"') break;
                if (s[j] == '\\') {
                    if (j + 1 >= s.size()) throw ParseError(l, co, "unterminated string");
                    const char e = s[j + 1];
                    if (e == '"') text += '"';
                    else if (e == '\\') text += '\\';
                    else if (e == 'n') text += '\n';
                    else throw ParseError(line, ccol, std::string("unknown escape '\\") + e + "'");
                    j += 2;
                    ccol += 2;
                    continue;
                }
                text += s[j];
                ++j;
                ++ccol;
            }
            push(Tok::String, std::move(text), l, co);
            col = ccol + 1;
            i = j + 1;
            continue;
        }
        Tok k;
        switch (c) {
            case '(': k = Tok::LParen; ++depth; break;
            case ')': k = Tok::RParen; if (depth > 0) --depth; break;
            case ',': k = Tok::Comma; break;
            case '.': k = Tok::Dot; break;
            case '=': k = Tok::Assign; break;
            case '&': k = Tok::Amp; break;
            case '|': k = Tok::Pipe; break;
            case '-': k = Tok::Minus; break;
            case '^': k = Tok::Caret; break;
            default:
                throw ParseError(l, co, std::string("unexpected character '") + c + "'");
        }
        push(k, std::string(1, c), l, co);
        ++i;
        ++col;
    }
    if (!out.empty() && out.back().kind != Tok::Newline) {
        push(Tok::Newline, "\n", line, col);
    }
    push(Tok::End, "", line, col);
    return out;
}

int64_t parse_i64(const Token& t) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size()) {
        throw ParseError(t.line, t.col, "number out of range");
    }
    return v;
}

struct Parser {
    std::vector<Token> toks;
    size_t pos = 0;

    const Token& peek(size_t k = 0) const {
        const size_t i = std::min(pos + k, toks.size() - 1);
        return toks[i];
    }
    bool at(Tok k) const { return peek().kind == k; }
    const Token& advance() { return toks[pos++]; }
    const Token& expect(Tok k, const char* what) {
        if (!at(k)) throw ParseError(peek().line, peek().col, std::string("expected ") + what);
        return advance();
    }
    void skip_newlines() {
        while (at(Tok::Newline)) advance();
    }

    ScriptAst parse_script() {
        ScriptAst ast;
        skip_newlines();
        while (!at(Tok::End)) {
            ast.statements.push_back(parse_stmt());
            skip_newlines();
        }
        return ast;
    }

    Stmt parse_stmt() {
        Stmt st;
        st.line = peek().line;
        if (at(Tok::Ident) && peek(1).kind == Tok::Assign) {
            st.name = advance().text;
            advance();  // '='
            if (at(Tok::Ident) && peek().text == "input" && peek(1).kind == Tok::LParen) {
                advance();
                advance();
                st.kind = Stmt::Kind::LayerDecl;
                st.source = expect(Tok::String, "a quoted layer name in input(...)").text;
                expect(Tok::RParen, "')'");
            } else {
                st.kind = Stmt::Kind::Assign;
                st.expr = parse_expr();
            }
        } else {
            ExprPtr e = parse_expr();
            if (!at(Tok::Dot)) {
                throw ParseError(peek().line, peek().col,
                                 "statement must be an assignment or end in .output(...)");
            }
            advance();
            const Token& m = expect(Tok::Ident, "method name after '.'");
            if (m.text != "output") {
                throw ParseError(m.line, m.col, "only output(...) may follow a full expression here");
            }
            expect(Tok::LParen, "'('");
            st.kind = Stmt::Kind::Output;
            st.expr = std::move(e);
            st.rule_name = expect(Tok::String, "rule name string").text;
            expect(Tok::Comma, "','");
            st.description = expect(Tok::String, "description string").text;
            expect(Tok::RParen, "')'");
        }
        if (!at(Tok::End)) expect(Tok::Newline, "end of statement");
        return st;
    }

    ExprPtr parse_expr() {
        ExprPtr e = parse_term();
        while (at(Tok::Amp) || at(Tok::Pipe) || at(Tok::Minus) || at(Tok::Caret)) {
            const Tok op = advance().kind;
            ExprPtr rhs = parse_term();
            BoolOp bop = BoolOp::And;
            if (op == Tok::Pipe) bop = BoolOp::Or;
            else if (op == Tok::Minus) bop = BoolOp::Sub;
            else if (op == Tok::Caret) bop = BoolOp::Xor;
            e = Expr::make_binary(bop, std::move(e), std::move(rhs));
        }
        return e;
    }

    ExprPtr parse_term() {
        ExprPtr e;
        if (at(Tok::LParen)) {
            advance();
            e = parse_expr();
            expect(Tok::RParen, "')'");
        } else if (at(Tok::Ident)) {
            const Token& t = advance();
            if (t.text == "input" && at(Tok::LParen)) {
                throw ParseError(t.line, t.col,
                                 "input(...) is only allowed as the whole right-hand side of an "
                                 "assignment");
            }
            e = Expr::make_layer(t.text);
        } else {
            throw ParseError(peek().line, peek().col, "expected layer name or '('");
        }
        while (at(Tok::Dot) && peek(1).kind == Tok::Ident && peek(1).text != "output") {
            advance();
            const Token m = advance();
            expect(Tok::LParen, "'('");
            if (m.text == "sized") {
                const Coord delta = parse_length(/*allow_negative=*/true, /*require_positive=*/false);
                expect(Tok::RParen, "')'");
                e = Expr::make_sized(std::move(e), delta);
            } else if (m.text == "width" || m.text == "spacing") {
                const Coord d = parse_length(false, true);
                expect(Tok::RParen, "')'");
                e = Expr::make_check(m.text == "width" ? CheckKind::Width : CheckKind::Spacing,
                                     std::move(e), nullptr, d);
            } else if (m.text == "separation" || m.text == "sep" || m.text == "enclosed") {
                ExprPtr other = parse_expr();
                expect(Tok::Comma, "','");
                const Coord d = parse_length(false, true);
                expect(Tok::RParen, "')'");
                e = Expr::make_check(
                    m.text == "enclosed" ? CheckKind::Enclosed : CheckKind::Separation,
                    std::move(e), std::move(other), d);
            } else {
                throw ParseError(m.line, m.col, "unknown method '" + m.text + "'");
            }
        }
        return e;
    }

    // Length literal: INT (nm) | INT.nm | DECIMAL.um. Whole-nm resolution.
    Coord parse_length(bool allow_negative, bool require_positive) {
        bool neg = false;
        if (at(Tok::Minus)) {
            if (!allow_negative) {
                throw ParseError(peek().line, peek().col, "this length must be positive");
            }
            advance();
            neg = true;
        }
        const Token num = expect(Tok::Number, "length literal");
        int64_t nm = 0;
        const size_t dot = num.text.find('.');
        if (at(Tok::Dot) && peek(1).kind == Tok::Ident &&
            (peek(1).text == "nm" || peek(1).text == "um")) {
            advance();
            const Token unit = advance();
            if (unit.text == "nm") {
                if (dot != std::string::npos) {
                    throw ParseError(num.line, num.col,
                                     "nm literals are whole numbers (grid resolution is 1 nm)");
                }
                nm = parse_i64(num);
            } else {
                // exact scaled-integer parse, no floating point
                const std::string ip_s = dot == std::string::npos ? num.text : num.text.substr(0, dot);
                std::string fr_s = dot == std::string::npos ? "" : num.text.substr(dot + 1);
                if (fr_s.size() > 3) {
                    throw ParseError(num.line, num.col,
                                     "um literal finer than 1 nm (grid resolution is 1 nm)");
                }
                while (fr_s.size() < 3) fr_s += '0';
                Token ip_tok = num;
                ip_tok.text = ip_s;
                Token fr_tok = num;
                fr_tok.text = fr_s;
                const int64_t ip = parse_i64(ip_tok);
                const int64_t fr = fr_s.empty() ? 0 : parse_i64(fr_tok);
                if (ip > (INT64_MAX - fr) / 1000) throw ParseError(num.line, num.col, "length out of range");
                nm = ip * 1000 + fr;
            }
        } else {
            if (dot != std::string::npos) {
                throw ParseError(num.line, num.col,
                                 "a decimal length needs a .um unit (bare numbers are nm)");
            }
            nm = parse_i64(num);
        }
        Coord units;
        try {
            units = nm_to_units(nm);
        } catch (const CoordOverflow&) {
            throw ParseError(num.line, num.col, "length out of coordinate range");
        }
        if (require_positive && units <= 0) {
            throw ParseError(num.line, num.col, "threshold must be positive");
        }
        return neg ? static_cast<Coord>(-units) : units;
    }
};

void collect_layers(const Expr& e, const std::map<std::string, size_t>& defs, size_t stmt_index,
                    std::set<std::string>& inputs) {
    switch (e.kind) {
        case Expr::Kind::Layer: {
            auto it = defs.find(e.layer);
            if (it == defs.end()) {
                inputs.insert(e.layer);
            } else if (it->second >= stmt_index) {
                throw SemanticError(e.layer, "used before its definition");
            }
            break;
        }
        case Expr::Kind::Binary:
            collect_layers(*e.lhs, defs, stmt_index, inputs);
            collect_layers(*e.rhs, defs, stmt_index, inputs);
            break;
        case Expr::Kind::Sized:
            collect_layers(*e.base, defs, stmt_index, inputs);
            break;
        case Expr::Kind::Check:
            collect_layers(*e.base, defs, stmt_index, inputs);
            if (e.other) collect_layers(*e.other, defs, stmt_index, inputs);
            break;
    }
}

void print_expr(const Expr& e, std::string& out, bool as_atom);

void print_length(Coord units, std::string& out) {
    // internal units are always even here (whole-nm literals only)
    if (units < 0) {
        out += '-';
        units = static_cast<Coord>(-units);
    }
    out += std::to_string(units / kUnitsPerNm);
    out += ".nm";
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\\\"";
        else if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    out += '"';
    return out;
}

void print_expr(const Expr& e, std::string& out, bool as_atom) {
    switch (e.kind) {
        case Expr::Kind::Layer:
            out += e.layer;
            return;
        case Expr::Kind::Binary: {
            if (as_atom) out += '(';
            print_expr(*e.lhs, out, false);
            switch (e.op) {
                case BoolOp::And: out += " & "; break;
                case BoolOp::Or: out += " | "; break;
                case BoolOp::Sub: out += " - "; break;
                case BoolOp::Xor: out += " ^ "; break;
            }
            print_expr(*e.rhs, out, true);  // left-assoc: parenthesize binary rhs
            if (as_atom) out += ')';
            return;
        }
        case Expr::Kind::Sized:
            print_expr(*e.base, out, true);
            out += ".sized(";
            print_length(e.delta, out);
            out += ')';
            return;
        case Expr::Kind::Check: {
            print_expr(*e.base, out, true);
            switch (e.check) {
                case CheckKind::Width: out += ".width("; break;
                case CheckKind::Spacing: out += ".spacing("; break;
                case CheckKind::Separation: out += ".separation("; break;
                case CheckKind::Enclosed: out += ".enclosed("; break;
            }
            if (e.other) {
                print_expr(*e.other, out, false);
                out += ", ";
            }
            print_length(e.dist, out);
            out += ')';
            return;
        }
    }
}

}  // namespace

ExprPtr Expr::make_layer(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Layer;
    e->layer = std::move(name);
    return e;
}
ExprPtr Expr::make_binary(BoolOp op, ExprPtr l, ExprPtr r) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Binary;
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
}
ExprPtr Expr::make_sized(ExprPtr base, Coord delta) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Sized;
    e->base = std::move(base);
    e->delta = delta;
    return e;
}
ExprPtr Expr::make_check(CheckKind k, ExprPtr base, ExprPtr other, Coord dist) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Check;
    e->check = k;
    e->base = std::move(base);
    e->other = std::move(other);
    e->dist = dist;
    return e;
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Expr::Kind::Layer:
            return a.layer == b.layer;
        case Expr::Kind::Binary:
            return a.op == b.op && expr_equal(*a.lhs, *b.lhs) && expr_equal(*a.rhs, *b.rhs);
        case Expr::Kind::Sized:
            return a.delta == b.delta && expr_equal(*a.base, *b.base);
        case Expr::Kind::Check:
            if (a.check != b.check || a.dist != b.dist) return false;
            if (!expr_equal(*a.base, *b.base)) return false;
            if (static_cast<bool>(a.other) != static_cast<bool>(b.other)) return false;
            return !a.other || expr_equal(*a.other, *b.other);
    }
    return false;
}

bool ScriptAst::operator==(const ScriptAst& o) const {
    if (statements.size() != o.statements.size()) return false;
    for (size_t i = 0; i < statements.size(); ++i) {
        const Stmt& a = statements[i];
        const Stmt& b = o.statements[i];
        if (a.kind != b.kind || a.name != b.name || a.source != b.source ||
            a.rule_name != b.rule_name || a.description != b.description) {
            return false;
        }
        if (static_cast<bool>(a.expr) != static_cast<bool>(b.expr)) return false;
        if (a.expr && !expr_equal(*a.expr, *b.expr)) return false;
    }
    return true;
}

ScriptAst parse(std::string_view text) {
    Parser p{lex(text)};
    return p.parse_script();
}

CheckedScript resolve(const ScriptAst& ast) {
    std::map<std::string, size_t> defs;
    std::vector<std::string> defined;
    for (size_t i = 0; i < ast.statements.size(); ++i) {
        const Stmt& st = ast.statements[i];
        if (st.kind == Stmt::Kind::LayerDecl || st.kind == Stmt::Kind::Assign) {
            if (defs.count(st.name)) throw SemanticError(st.name, "defined more than once");
            defs[st.name] = i;
            defined.push_back(st.name);
        }
    }
    std::set<std::string> inputs;
    for (size_t i = 0; i < ast.statements.size(); ++i) {
        const Stmt& st = ast.statements[i];
        if (st.kind == Stmt::Kind::LayerDecl) {
            inputs.insert(st.source);
        } else if (st.expr) {
            collect_layers(*st.expr, defs, i, inputs);
        }
    }
    CheckedScript out;
    out.ast = ast;
    out.input_layers.assign(inputs.begin(), inputs.end());
    out.defined_names = std::move(defined);
    return out;
}

CheckedScript compile(std::string_view text) { return resolve(parse(text)); }

std::string pretty_print(const Expr& e) {
    std::string out;
    print_expr(e, out, false);
    return out;
}

std::string pretty_print(const ScriptAst& ast) {
    std::string out;
    for (const Stmt& st : ast.statements) {
        switch (st.kind) {
            case Stmt::Kind::LayerDecl:
                out += st.name + " = input(" + quote(st.source) + ")";
                break;
            case Stmt::Kind::Assign:
                out += st.name + " = ";
                print_expr(*st.expr, out, false);
                break;
            case Stmt::Kind::Output:
                print_expr(*st.expr, out, true);
                out += ".output(" + quote(st.rule_name) + ", " + quote(st.description) + ")";
                break;
        }
        out += '\n';
    }
    return out;
}

}  // namespace drc
