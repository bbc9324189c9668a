#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace drc {

// One template per oracle role. A template file has three sections:
//
//   [system]
//   ...system message...
//   [user]
//   ...context prefix; must contain the literal slot <doc></doc> exactly once,
//   which rendering fills with the user-supplied documentation text...
//   [body]
//   ...task body with {placeholder} fields from the role's closed set...
//
// Placeholders are validated at load time: a body may only use placeholders
// from its role's allowed set.
enum class PromptRole {
    CandidateGen = 0,
    TestGen,
    SplitTestGen,
    Judge,
    PairwiseJudge,
    CodemonkeyInteractive,
    Revise,
};
inline constexpr int kPromptRoleCount = 7;

const char* prompt_role_name(PromptRole role);          // e.g. "candidate-gen"
const char* prompt_role_file(PromptRole role);          // e.g. "candidate-gen.txt"
const std::vector<std::string>& prompt_role_placeholders(PromptRole role);

struct PromptTemplate {
    std::string system;
    std::string user_prefix;  // contains the <doc></doc> slot
    std::string body;         // task body with {placeholder}s
};

class TemplateSet {
  public:
    static TemplateSet builtin();
    // Loads <dir>/<role>.txt for all 7 roles; missing file, bad sectioning,
    // missing doc slot, or an unknown placeholder raises TemplateError.
    static TemplateSet load_dir(const std::string& dir);

    const PromptTemplate& at(PromptRole role) const {
        return templates_[static_cast<size_t>(role)];
    }

  private:
    std::array<PromptTemplate, kPromptRoleCount> templates_{};
};

// Parses one template file's text (section format above) and validates it
// against the role's placeholder set.
PromptTemplate parse_template_text(const std::string& text, PromptRole role);

// Substitutes every {placeholder} in the body. Missing value -> TemplateError.
std::string render_body(const PromptTemplate& t, const std::map<std::string, std::string>& values);

// Fills the <doc></doc> slot and appends the rendered body.
std::string render_user_message(const PromptTemplate& t, const std::string& doc_text,
                                const std::string& rendered_body);

}  // namespace drc
