#include "drc/oracle_http.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

#include "drc/errors.hpp"
#include "drc/layout_io.hpp"

namespace drc {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

void split_url(const std::string& endpoint, std::string& base, std::string& path) {
    const size_t scheme = endpoint.find("://");
    const size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const size_t slash = endpoint.find('/', host_start);
    if (slash == std::string::npos) {
        base = endpoint;
        path = "/v1/chat/completions";
    } else {
        base = endpoint.substr(0, slash);
        path = endpoint.substr(slash);
    }
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::string numbered_candidates(const std::vector<std::string>& cands) {
    std::string out;
    for (size_t i = 0; i < cands.size(); ++i) {
        out += "--- candidate " + std::to_string(i) + " ---\n" + cands[i];
        if (out.empty() || out.back() != '\n') out += '\n';
    }
    return out;
}

std::string verdict_word(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Violation: return "VIOLATION";
        case Verdict::Error: return "ERROR";
    }
    return "ERROR";
}

std::string render_test_text(const TestCase& t) {
    return "expected " + verdict_word(t.expected) + "\n" + layout_to_json(t.layout).dump() + "\n";
}

std::string render_evidence_text(const std::vector<JudgeEvidence>& evidence, bool swap_pair) {
    std::string out;
    for (size_t k = 0; k < evidence.size(); ++k) {
        const JudgeEvidence& e = evidence[k];
        out += "test " + std::to_string(k) + " (expected " + verdict_word(e.test.expected) +
               "): " + layout_to_json(e.test.layout).dump() + "\n  outcomes:";
        std::vector<Outcome> outs = e.outcomes;
        if (swap_pair && outs.size() >= 2) std::swap(outs[0], outs[1]);
        for (size_t f = 0; f < outs.size(); ++f) {
            out += " " + std::to_string(f) + "=" + to_string(outs[f]);
        }
        out += '\n';
    }
    return out;
}

std::string render_failing_text(const std::vector<std::pair<TestCase, Outcome>>& failing) {
    std::string out;
    for (size_t k = 0; k < failing.size(); ++k) {
        out += "test " + std::to_string(k) + " (expected " + verdict_word(failing[k].first.expected) +
               ", got " + to_string(failing[k].second) +
               "): " + layout_to_json(failing[k].first.layout).dump() + "\n";
    }
    return out;
}

// RAII slot in the in-flight gate.
struct GateSlot {
    std::counting_semaphore<>& gate;
    explicit GateSlot(std::counting_semaphore<>& g) : gate(g) { gate.acquire(); }
    ~GateSlot() { gate.release(); }
};

}  // namespace

HttpOracleConfig HttpOracleConfig::from_env() {
    HttpOracleConfig cfg;
    cfg.endpoint = env_or("ORACLE_ENDPOINT", "");
    if (cfg.endpoint.empty()) {
        throw ConfigError("ORACLE_ENDPOINT is not set (required for the HTTP oracle)");
    }
    cfg.model = env_or("ORACLE_MODEL", "default");
    cfg.api_key = env_or("ORACLE_API_KEY", "");
    const std::string inflight = env_or("ORACLE_MAX_INFLIGHT", "");
    if (!inflight.empty()) {
        try {
            cfg.max_inflight = std::stoi(inflight);
        } catch (const std::exception&) {
            throw ConfigError("ORACLE_MAX_INFLIGHT is not an integer: " + inflight);
        }
        if (cfg.max_inflight < 1) {
            throw ConfigError("ORACLE_MAX_INFLIGHT must be >= 1");
        }
    }
    return cfg;
}

std::string strip_code_fences(const std::string& text) {
    const size_t open = text.find("```");
    if (open == std::string::npos) return trim(text);
    const size_t nl = text.find('\n', open);
    if (nl == std::string::npos) return trim(text);
    const size_t close = text.find("```", nl + 1);
    if (close == std::string::npos) return trim(text.substr(nl + 1));
    return trim(text.substr(nl + 1, close - nl - 1));
}

std::optional<int> parse_judge_reply(const std::string& text, int finalist_count) {
    const std::string s = strip_code_fences(text);
    for (size_t i = 0; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
        if (i > 0) {
            const char p = s[i - 1];
            const bool mid_token = std::isalnum(static_cast<unsigned char>(p)) || p == '-' ||
                                   p == '_' ||
                                   (p == '.' && i >= 2 &&
                                    std::isdigit(static_cast<unsigned char>(s[i - 2])));
            if (mid_token) {
                while (i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
                    ++i;
                }
                continue;
            }
        }
        size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        const bool is_float =
            j + 1 < s.size() && s[j] == '.' && std::isdigit(static_cast<unsigned char>(s[j + 1]));
        const bool glued =
            j < s.size() && (std::isalpha(static_cast<unsigned char>(s[j])) || s[j] == '_');
        if (is_float || glued) {
            i = j;
            continue;
        }
        int v = -1;
        try {
            v = std::stoi(s.substr(i, j - i));
        } catch (const std::exception&) {
            i = j;
            continue;
        }
        if (v >= 0 && v < finalist_count) return v;
        return std::nullopt;  // the model named an index, but an invalid one
    }
    return std::nullopt;
}

std::optional<PairwiseVerdict> parse_pairwise_reply(const std::string& text) {
    const std::string s = strip_code_fences(text);
    for (size_t i = 0; i < s.size();) {
        if (!std::isalpha(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        size_t j = i;
        std::string w;
        while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) {
            w += static_cast<char>(std::toupper(static_cast<unsigned char>(s[j])));
            ++j;
        }
        const bool left_ok =
            i == 0 || !(std::isdigit(static_cast<unsigned char>(s[i - 1])) || s[i - 1] == '_');
        const bool right_ok =
            j == s.size() || !(std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '_');
        if (left_ok && right_ok) {
            if (w == "A") return PairwiseVerdict::A;
            if (w == "B") return PairwiseVerdict::B;
            if (w == "TIE") return PairwiseVerdict::Tie;
        }
        i = j;
    }
    return std::nullopt;
}

TestCase parse_test_reply(const std::string& text) {
    const std::string body = strip_code_fences(text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const std::exception& e) {
        throw IngestError(std::string("test reply is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("layout") || !j.contains("expected")) {
        throw IngestError("test reply must be a JSON object with \"layout\" and \"expected\"");
    }
    TestCase tc;
    tc.layout = layout_from_json(j["layout"]);
    if (!j["expected"].is_string()) {
        throw IngestError("\"expected\" must be the string \"PASS\" or \"VIOLATION\"");
    }
    const std::string exp = j["expected"].get<std::string>();
    if (exp == "PASS") {
        tc.expected = Verdict::Pass;
    } else if (exp == "VIOLATION") {
        tc.expected = Verdict::Violation;
    } else {
        throw IngestError("\"expected\" must be \"PASS\" or \"VIOLATION\", got \"" + exp + "\"");
    }
    return tc;
}

CodemonkeyStep parse_codemonkey_reply(const std::string& text, int finalist_count) {
    CodemonkeyStep step;
    const std::string body = strip_code_fences(text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const std::exception&) {
        step.malformed = true;
        return step;
    }
    if (j.is_object() && j.contains("decision")) {
        if (j["decision"].is_number_integer()) {
            const int v = j["decision"].get<int>();
            if (v >= 0 && v < finalist_count) {
                step.decide = true;
                step.decision_index = v;
                return step;
            }
        }
        step.malformed = true;
        return step;
    }
    try {
        step.replacement = parse_test_reply(body);
        step.replacement.origin = TestOrigin::Edited;
        return step;
    } catch (const Error&) {
        step.malformed = true;
        return step;
    }
}

HttpOracle::HttpOracle(HttpOracleConfig cfg, TemplateSet templates, std::string doc_text)
    : cfg_(std::move(cfg)),
      templates_(std::move(templates)),
      doc_(std::move(doc_text)),
      gate_(std::max(1, cfg_.max_inflight)) {
    if (cfg_.endpoint.empty()) throw ConfigError("HTTP oracle endpoint is empty");
    split_url(cfg_.endpoint, base_, path_);
}

std::string HttpOracle::complete(PromptRole role,
                                 const std::map<std::string, std::string>& values) {
    const PromptTemplate& t = templates_.at(role);
    const std::string body = render_body(t, values);
    const std::string user = render_user_message(t, doc_, body);

    const nlohmann::json req{
        {"model", cfg_.model},
        {"messages",
         nlohmann::json::array({nlohmann::json{{"role", "system"}, {"content", t.system}},
                                nlohmann::json{{"role", "user"}, {"content", user}}})},
        {"temperature", cfg_.temperature},
        {"max_tokens", cfg_.max_tokens},
        {"seed", cfg_.seed + request_counter_.fetch_add(1, std::memory_order_relaxed)},
    };
    const std::string payload = req.dump();

    std::string last_err = "no attempts made";
    for (int attempt = 0; attempt < std::max(1, cfg_.retries); ++attempt) {
        GateSlot slot(gate_);
        httplib::Client cli(base_);
        cli.set_connection_timeout(10, 0);
        cli.set_read_timeout(300, 0);
        cli.set_write_timeout(60, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto res = cli.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_err = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_err = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            const nlohmann::json rj = nlohmann::json::parse(res->body);
            const std::string content =
                rj.at("choices").at(0).at("message").at("content").get<std::string>();
            uint64_t tokens = content.size() / 4;
            if (rj.contains("usage") && rj["usage"].is_object() &&
                rj["usage"].contains("completion_tokens") &&
                rj["usage"]["completion_tokens"].is_number_unsigned()) {
                tokens = rj["usage"]["completion_tokens"].get<uint64_t>();
            }
            ledger_.add_llm_call(tokens);
            return content;
        } catch (const std::exception& e) {
            last_err = std::string("bad completion payload: ") + e.what();
            continue;
        }
    }
    throw OracleUnavailable("request to " + base_ + path_ + " failed after " +
                            std::to_string(std::max(1, cfg_.retries)) + " attempts (" + last_err +
                            ")");
}

std::vector<std::string> HttpOracle::gen_candidates(const std::string& rule, int n) {
    if (n < 1) throw DomainError("gen_candidates: n must be >= 1");
    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::string reply =
            complete(PromptRole::CandidateGen, {{"rule", rule}, {"n", "1"}});
        out.push_back(strip_code_fences(reply));
    }
    return out;
}

TestCase HttpOracle::gen_test(const std::string& rule,
                              const std::vector<std::string>& context_candidates) {
    const PromptRole role =
        context_candidates.empty() ? PromptRole::TestGen : PromptRole::SplitTestGen;
    std::string trace;
    for (int attempt = 0; attempt < 5; ++attempt) {
        std::map<std::string, std::string> values{{"rule", rule + trace}};
        if (!context_candidates.empty()) {
            values["candidates"] = numbered_candidates(context_candidates);
        }
        const std::string reply = complete(role, values);
        try {
            TestCase tc = parse_test_reply(reply);
            tc.origin = context_candidates.empty() ? TestOrigin::Initial : TestOrigin::SplitAttempt;
            return tc;
        } catch (const IngestError& e) {
            ledger_.add_test_retries(1);
            trace = "\n\n[previous attempt was rejected: " + std::string(e.what()) +
                    " — reply with exactly one JSON object {\"layout\": ..., \"expected\": "
                    "\"PASS\"|\"VIOLATION\"}]";
        }
    }
    throw TestGenExhausted("test generation failed schema validation 5 times");
}

int HttpOracle::judge(const std::string& rule, const std::vector<std::string>& finalists,
                      const std::vector<JudgeEvidence>& evidence,
                      const std::vector<double>& scores) {
    if (finalists.empty()) throw DomainError("judge: no finalists");
    if (finalists.size() == 1) return 0;
    const std::string reply =
        complete(PromptRole::Judge, {{"rule", rule},
                                     {"candidates", numbered_candidates(finalists)},
                                     {"evidence", render_evidence_text(evidence, false)}});
    if (const auto idx = parse_judge_reply(reply, static_cast<int>(finalists.size()))) {
        return *idx;
    }
    // malformed reply: fall back to the caller's best-scored finalist
    if (scores.size() != finalists.size()) return 0;
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

PairwiseVerdict HttpOracle::pairwise_judge(const std::string& rule, const std::string& a,
                                           const std::string& b,
                                           const std::vector<JudgeEvidence>& evidence) {
    const auto ask = [&](const std::string& first, const std::string& second, bool swapped) {
        return parse_pairwise_reply(
            complete(PromptRole::PairwiseJudge,
                     {{"rule", rule},
                      {"candidate_a", first},
                      {"candidate_b", second},
                      {"evidence", render_evidence_text(evidence, swapped)}}));
    };
    const auto r1 = ask(a, b, false);
    const auto r2 = ask(b, a, true);
    if (!r1 || !r2) return PairwiseVerdict::Tie;
    // map both replies back to the unswapped pair; keep only agreement
    const auto unswap = [](PairwiseVerdict v) {
        if (v == PairwiseVerdict::A) return PairwiseVerdict::B;
        if (v == PairwiseVerdict::B) return PairwiseVerdict::A;
        return PairwiseVerdict::Tie;
    };
    const PairwiseVerdict v1 = *r1;
    const PairwiseVerdict v2 = unswap(*r2);
    if (v1 == v2 && v1 != PairwiseVerdict::Tie) return v1;
    return PairwiseVerdict::Tie;
}

CodemonkeyStep HttpOracle::codemonkey_step(const std::string& rule,
                                           const std::vector<std::string>& finalists,
                                           const TestCase& current_test,
                                           const std::vector<JudgeEvidence>& evidence) {
    const std::string reply =
        complete(PromptRole::CodemonkeyInteractive,
                 {{"rule", rule},
                  {"candidates", numbered_candidates(finalists)},
                  {"test", render_test_text(current_test)},
                  {"evidence", render_evidence_text(evidence, false)}});
    return parse_codemonkey_reply(reply, static_cast<int>(finalists.size()));
}

std::string HttpOracle::revise(const std::string& rule, const std::string& script,
                               const std::vector<std::pair<TestCase, Outcome>>& failing) {
    const std::string reply = complete(
        PromptRole::Revise,
        {{"rule", rule}, {"script", script}, {"failing", render_failing_text(failing)}});
    return strip_code_fences(reply);
}

}  // namespace drc
