#include "drc/prompt.hpp"

#include <fstream>
#include <sstream>

#include "drc/errors.hpp"

namespace drc {

namespace {

constexpr const char* kRoleNames[kPromptRoleCount] = {
    "candidate-gen", "test-gen", "split-test-gen", "judge",
    "pairwise-judge", "codemonkey-interactive", "revise",
};

const std::vector<std::string>& placeholders_for(PromptRole role) {
    static const std::vector<std::string> sets[kPromptRoleCount] = {
        {"rule", "n"},                                // candidate-gen
        {"rule"},                                     // test-gen
        {"rule", "candidates"},                       // split-test-gen
        {"rule", "candidates", "evidence"},           // judge
        {"rule", "candidate_a", "candidate_b", "evidence"},  // pairwise-judge
        {"rule", "candidates", "test", "evidence"},   // codemonkey-interactive
        {"rule", "script", "failing"},                // revise
    };
    return sets[static_cast<size_t>(role)];
}

constexpr const char* kDocSlot = "<doc></doc>";

// Built-in templates. The text is intentionally plain: the mock oracle ignores
// it and the HTTP oracle treats it as opaque message content.
const char* builtin_text(PromptRole role) {
    switch (role) {
        case PromptRole::CandidateGen:
            return "[system]\n"
                   "You write DRC scripts in a KLayout-style rule DSL. Statements are one per\n"
                   "line: `name = input(\"layer\")`, `name = expr`, or `expr.output(\"RULE\",\n"
                   "\"description\")`. Expressions combine layers with & | - ^ and the methods\n"
                   "sized(len), width(len), spacing(len), separation(other, len), enclosed(other,\n"
                   "len). Lengths are integers in nm (850 or 850.nm) or decimals in um (0.850.um).\n"
                   "Reply with only the script, no commentary.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Write a DRC script enforcing this rule (sample {n} of a batch):\n{rule}\n";
        case PromptRole::TestGen:
            return "[system]\n"
                   "You design minimal test layouts for DRC rules. Reply with one JSON object:\n"
                   "{\"layout\": {\"name\": str, \"units\": \"nm\", \"rects\": [{\"layer\": str,\n"
                   "\"x0\": int, \"y0\": int, \"x1\": int, \"y1\": int}, ...]}, \"expected\":\n"
                   "\"PASS\" or \"VIOLATION\"}. Prefer corner cases right at the rule threshold.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Create one test layout with its expected verdict for this rule:\n{rule}\n";
        case PromptRole::SplitTestGen:
            return "[system]\n"
                   "You design minimal test layouts for DRC rules. Reply with one JSON object:\n"
                   "{\"layout\": {...layout JSON...}, \"expected\": \"PASS\" or \"VIOLATION\"}.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "These candidate scripts currently agree on every test. Create one test layout\n"
                   "(with its expected verdict) on which correct and incorrect candidates would\n"
                   "disagree.\nRule:\n{rule}\nCandidates:\n{candidates}\n";
        case PromptRole::Judge:
            return "[system]\n"
                   "You judge DRC scripts against a natural-language rule using execution\n"
                   "evidence. Reply with only the integer index (0-based) of the best candidate.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Rule:\n{rule}\nCandidates (indexed from 0):\n{candidates}\n"
                   "Evidence (tests where the candidates disagree):\n{evidence}\n"
                   "Best candidate index:\n";
        case PromptRole::PairwiseJudge:
            return "[system]\n"
                   "You compare two DRC scripts against a rule using execution evidence. Reply\n"
                   "with only the letter A or B.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Rule:\n{rule}\nCandidate A:\n{candidate_a}\nCandidate B:\n{candidate_b}\n"
                   "Evidence:\n{evidence}\nBetter candidate (A or B):\n";
        case PromptRole::CodemonkeyInteractive:
            return "[system]\n"
                   "You refine one DRC test layout to tell the finalist scripts apart, or decide.\n"
                   "Reply with one JSON object: either {\"decision\": <0-based index>} or\n"
                   "{\"layout\": {...layout JSON...}, \"expected\": \"PASS\" or \"VIOLATION\"}.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Rule:\n{rule}\nFinalists (indexed from 0):\n{candidates}\n"
                   "Current test layout:\n{test}\nOutcomes so far:\n{evidence}\n";
        case PromptRole::Revise:
            return "[system]\n"
                   "You revise a DRC script to fix failing tests without breaking passing ones.\n"
                   "Reply with only the revised script.\n"
                   "[user]\n"
                   "Reference documentation:\n<doc></doc>\n"
                   "[body]\n"
                   "Rule:\n{rule}\nCurrent script:\n{script}\nFailing tests:\n{failing}\n";
    }
    return "";
}

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Collects {name} tokens; a '{' not forming a placeholder is left alone.
std::vector<std::string> body_placeholders(const std::string& body) {
    std::vector<std::string> out;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        while (j < body.size() && is_placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            out.push_back(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return out;
}

}  // namespace

const char* prompt_role_name(PromptRole role) { return kRoleNames[static_cast<size_t>(role)]; }

const char* prompt_role_file(PromptRole role) {
    static const std::string files[kPromptRoleCount] = {
        std::string(kRoleNames[0]) + ".txt", std::string(kRoleNames[1]) + ".txt",
        std::string(kRoleNames[2]) + ".txt", std::string(kRoleNames[3]) + ".txt",
        std::string(kRoleNames[4]) + ".txt", std::string(kRoleNames[5]) + ".txt",
        std::string(kRoleNames[6]) + ".txt",
    };
    return files[static_cast<size_t>(role)].c_str();
}

const std::vector<std::string>& prompt_role_placeholders(PromptRole role) {
    return placeholders_for(role);
}

PromptTemplate parse_template_text(const std::string& text, PromptRole role) {
    PromptTemplate t;
    std::string* current = nullptr;
    size_t sections = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line == "[system]") { current = &t.system; ++sections; continue; }
        if (line == "[user]") { current = &t.user_prefix; ++sections; continue; }
        if (line == "[body]") { current = &t.body; ++sections; continue; }
        if (!current) {
            if (line.empty()) continue;
            throw TemplateError(std::string(prompt_role_name(role)) +
                                ": content before the [system] section");
        }
        *current += line;
        *current += '\n';
    }
    if (sections != 3) {
        throw TemplateError(std::string(prompt_role_name(role)) +
                            ": template needs exactly the sections [system], [user], [body]");
    }
    const size_t slot = t.user_prefix.find(kDocSlot);
    if (slot == std::string::npos ||
        t.user_prefix.find(kDocSlot, slot + 1) != std::string::npos) {
        throw TemplateError(std::string(prompt_role_name(role)) +
                            ": [user] section must contain the slot <doc></doc> exactly once");
    }
    const std::vector<std::string>& allowed = placeholders_for(role);
    for (const std::string& p : body_placeholders(t.body)) {
        bool ok = false;
        for (const std::string& a : allowed) ok = ok || a == p;
        if (!ok) {
            throw TemplateError(std::string(prompt_role_name(role)) + ": unknown placeholder {" +
                                p + "}");
        }
    }
    return t;
}

TemplateSet TemplateSet::builtin() {
    TemplateSet out;
    for (int i = 0; i < kPromptRoleCount; ++i) {
        const PromptRole role = static_cast<PromptRole>(i);
        out.templates_[static_cast<size_t>(i)] = parse_template_text(builtin_text(role), role);
    }
    return out;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
    TemplateSet out;
    for (int i = 0; i < kPromptRoleCount; ++i) {
        const PromptRole role = static_cast<PromptRole>(i);
        const std::string path = dir + "/" + prompt_role_file(role);
        std::ifstream in(path);
        if (!in) throw TemplateError("missing template file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        out.templates_[static_cast<size_t>(i)] = parse_template_text(buf.str(), role);
    }
    return out;
}

std::string render_body(const PromptTemplate& t, const std::map<std::string, std::string>& values) {
    std::string out;
    const std::string& body = t.body;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                const std::string name = body.substr(i + 1, j - i - 1);
                const auto it = values.find(name);
                if (it == values.end()) throw TemplateError("no value for placeholder {" + name + "}");
                out += it->second;
                i = j;
                continue;
            }
        }
        out += body[i];
    }
    return out;
}

std::string render_user_message(const PromptTemplate& t, const std::string& doc_text,
                                const std::string& rendered_body) {
    std::string out = t.user_prefix;
    const size_t slot = out.find(kDocSlot);
    out.replace(slot + 5, 0, doc_text);  // insert between <doc> and </doc>
    out += '\n';
    out += rendered_body;
    return out;
}

}  // namespace drc
