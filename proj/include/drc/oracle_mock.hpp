#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "drc/benchmark.hpp"
#include "drc/lang.hpp"
#include "drc/oracle.hpp"

namespace drc {

// Simulation knobs for the deterministic oracle.
struct MockConfig {
    // Fraction of gen_candidates output that is verdict-equivalent to the
    // hidden reference script (rounded to the nearest count).
    double correct_fraction = 0.3;
    // Probability that a generated test's expected label is flipped.
    double label_error = 0.0;
    // Probability that a gen_test slot fails outright (5 retries burned, then
    // TestGenExhausted).
    double testgen_fail_prob = 0.0;
    // Extra seed material for the candidate mutation stream.
    uint64_t mutation_seed = 0;
};

// Deterministic oracle simulating an LLM around a hidden reference script.
// One instance per task; every call draws its randomness from
// (run_seed, task_id, call index), so results depend only on call order.
//
//  - gen_candidates: exactly round(correct_fraction*n) scripts equivalent to
//    the reference (the reference verbatim plus comment-tagged copies); the
//    rest are seeded mutations (threshold nudges by 1..50 nm, spacing vs
//    separation swaps, operand swaps, a dropped output, injected syntax
//    errors), each verified non-equivalent on corner probe layouts.
//  - gen_test: corner-case geometry around the reference (and, for split
//    requests, candidate) thresholds; the expected label is the reference
//    verdict flipped with probability label_error.
//  - judge / pairwise_judge / codemonkey_step: agreement with the reference
//    verdicts on the evidence layouts decides.
//  - revise: nudges the mutated threshold closest to its reference value by
//    1 nm toward it.
class MockOracle : public Oracle {
  public:
    MockOracle(MockConfig cfg, std::string gt_script, const std::string& task_id,
               uint64_t run_seed);

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

    const std::string& gt_script() const { return gt_; }

  private:
    uint64_t next_call_seed();
    Verdict gt_verdict(const Layout& lay) const;
    TestCase make_corner_test(uint64_t call_seed,
                              const std::vector<std::string>& context_candidates);
    bool differs_from_gt_on_probes(const std::string& candidate) const;
    std::string mutate_candidate(uint64_t slot_seed) const;

    MockConfig cfg_;
    std::string gt_;
    uint64_t task_hash_;
    uint64_t seed_;
    std::atomic<uint64_t> calls_{0};

    CheckedScript gt_checked_;
    bool gt_ok_ = false;
    std::vector<CheckSite> gt_sites_;
    std::vector<Layout> probes_;         // corner probes for mutation vetting
    std::vector<Verdict> gt_on_probes_;  // reference verdicts on the probes
};

}  // namespace drc
