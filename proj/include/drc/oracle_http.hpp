#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "drc/oracle.hpp"
#include "drc/prompt.hpp"

namespace drc {

// Chat-completion client settings. from_env reads:
//   ORACLE_ENDPOINT     required; full URL, e.g. http://host:8000/v1/chat/completions
//                       (a URL without a path gets /v1/chat/completions appended)
//   ORACLE_MODEL        model name sent in the request (default "default")
//   ORACLE_API_KEY      optional bearer token
//   ORACLE_MAX_INFLIGHT optional, max concurrent requests (default 4)
struct HttpOracleConfig {
    std::string endpoint;
    std::string model = "default";
    std::string api_key;
    int max_inflight = 4;
    int retries = 3;  // transport attempts per request before OracleUnavailable
    double temperature = 0.8;
    int max_tokens = 4096;
    uint64_t seed = 0;  // base of the per-request seed passthrough

    static HttpOracleConfig from_env();  // ConfigError if ORACLE_ENDPOINT unset/empty
};

// ---- reply parsers (pure, unit-testable) ------------------------------------

// Returns the content of the first ``` fenced block (language tag dropped), or
// the whole text trimmed when there is no fence.
std::string strip_code_fences(const std::string& text);

// First standalone integer in the reply if it lies in [0, finalist_count).
std::optional<int> parse_judge_reply(const std::string& text, int finalist_count);

// First standalone token among A / B / TIE (case-insensitive).
std::optional<PairwiseVerdict> parse_pairwise_reply(const std::string& text);

// Fenced or bare JSON {"layout": <layout doc>, "expected": "PASS"|"VIOLATION"}.
// Throws IngestError with a diagnostic suitable for a retry trace.
TestCase parse_test_reply(const std::string& text);

// Fenced or bare JSON, either {"decision": k} with k in [0, finalist_count)
// or a test document as above. Anything else -> step.malformed.
CodemonkeyStep parse_codemonkey_reply(const std::string& text, int finalist_count);

// Oracle backed by a chat-completion HTTP service. Thread-safe; concurrent
// requests are capped by max_inflight. Transport failures are retried
// config.retries times per request, then raise OracleUnavailable.
class HttpOracle : public Oracle {
  public:
    HttpOracle(HttpOracleConfig cfg, TemplateSet templates, std::string doc_text);

    std::vector<std::string> gen_candidates(const std::string& rule, int n) override;
    TestCase gen_test(const std::string& rule,
                      const std::vector<std::string>& context_candidates) override;
    int judge(const std::string& rule, const std::vector<std::string>& finalists,
              const std::vector<JudgeEvidence>& evidence,
              const std::vector<double>& scores) override;
    PairwiseVerdict pairwise_judge(const std::string& rule, const std::string& a,
                                   const std::string& b,
                                   const std::vector<JudgeEvidence>& evidence) override;
    CodemonkeyStep codemonkey_step(const std::string& rule,
                                   const std::vector<std::string>& finalists,
                                   const TestCase& current_test,
                                   const std::vector<JudgeEvidence>& evidence) override;
    std::string revise(const std::string& rule, const std::string& script,
                       const std::vector<std::pair<TestCase, Outcome>>& failing) override;

  private:
    // One round trip: render the role's prompt, POST, return message content.
    std::string complete(PromptRole role, const std::map<std::string, std::string>& values);

    HttpOracleConfig cfg_;
    TemplateSet templates_;
    std::string doc_;
    std::string base_;  // scheme://host[:port]
    std::string path_;  // request path
    std::counting_semaphore<> gate_;
    std::atomic<uint64_t> request_counter_{0};
};

}  // namespace drc
