#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drc/engine.hpp"
#include "drc/geometry.hpp"

namespace drc {

// Where a test case came from, recorded in audit traces.
enum class TestOrigin { Initial, SplitAttempt, Edited };
const char* test_origin_name(TestOrigin o);

struct TestCase {
    Layout layout;
    Verdict expected = Verdict::Pass;  // PASS or VIOLATION, never ERROR
    TestOrigin origin = TestOrigin::Initial;
    int origin_cluster = -1;  // cluster position a split attempt targeted
};

struct BudgetSnapshot {
    uint64_t llm_calls = 0;
    uint64_t gen_tokens = 0;
    uint64_t drc_evals = 0;
    uint64_t test_retries = 0;
};

// Monotone cost counters shared across workers.
class BudgetLedger {
  public:
    void add_llm_call(uint64_t gen_tokens) {
        llm_calls_.fetch_add(1, std::memory_order_relaxed);
        gen_tokens_.fetch_add(gen_tokens, std::memory_order_relaxed);
    }
    void add_drc_eval() { drc_evals_.fetch_add(1, std::memory_order_relaxed); }
    void add_test_retries(uint64_t n) { test_retries_.fetch_add(n, std::memory_order_relaxed); }

    BudgetSnapshot snapshot() const {
        return BudgetSnapshot{llm_calls_.load(), gen_tokens_.load(), drc_evals_.load(),
                              test_retries_.load()};
    }

  private:
    std::atomic<uint64_t> llm_calls_{0};
    std::atomic<uint64_t> gen_tokens_{0};
    std::atomic<uint64_t> drc_evals_{0};
    std::atomic<uint64_t> test_retries_{0};
};

// One piece of judge evidence: a test and each finalist's outcome on it, in
// the same order as the finalist list passed alongside.
struct JudgeEvidence {
    TestCase test;
    std::vector<Outcome> outcomes;
};

enum class PairwiseVerdict { A, B, Tie };

// Reply of one interactive test-refinement step: either a decision among the
// finalists or a replacement test. A malformed reply burns the caller's edit
// budget without changing the current test.
struct CodemonkeyStep {
    bool decide = false;
    int decision_index = -1;
    bool malformed = false;
    TestCase replacement;
};

// Generation interface consumed by the selection agents. Implementations must
// be callable from several workers at once; all cost counters live in the
// ledger. drc_evals is intentionally NOT incremented here: the selection-side
// evaluator meters every engine run it triggers.
class Oracle {
  public:
    virtual ~Oracle() = default;

    // Exactly n candidate scripts. DomainError if n < 1.
    virtual std::vector<std::string> gen_candidates(const std::string& rule, int n) = 0;

    // One test with an expected label. Empty context: plain test generation;
    // non-empty: the test should distinguish the given candidate scripts.
    // Throws TestGenExhausted after 5 failed attempts (retries are counted in
    // the ledger; the caller skips the slot).
    virtual TestCase gen_test(const std::string& rule,
                              const std::vector<std::string>& context_candidates) = 0;

    // Index into finalists (1..4 of them). `scores` mirror the caller's
    // current per-finalist scores and order the malformed-reply fallback.
    virtual int judge(const std::string& rule, const std::vector<std::string>& finalists,
                      const std::vector<JudgeEvidence>& evidence,
                      const std::vector<double>& scores) = 0;

    virtual PairwiseVerdict pairwise_judge(const std::string& rule, const std::string& a,
                                           const std::string& b,
                                           const std::vector<JudgeEvidence>& evidence) = 0;

    virtual CodemonkeyStep codemonkey_step(const std::string& rule,
                                           const std::vector<std::string>& finalists,
                                           const TestCase& current_test,
                                           const std::vector<JudgeEvidence>& evidence) = 0;

    // Proposes a replacement script given failing tests; the caller decides
    // whether to accept it.
    virtual std::string revise(const std::string& rule, const std::string& script,
                               const std::vector<std::pair<TestCase, Outcome>>& failing) = 0;

    BudgetLedger& ledger() { return ledger_; }
    const BudgetLedger& ledger() const { return ledger_; }

  protected:
    BudgetLedger ledger_;
};

}  // namespace drc
