#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drc/engine.hpp"
#include "drc/oracle.hpp"

namespace drc {

// Candidate scripts under selection. Indices are stable identities for the
// whole run; every agent reports its winner as an index into this pool.
struct CandidatePool {
    std::string rule;
    std::vector<std::string> candidates;
    std::vector<bool> compiles;  // per-candidate compile status
};

// DomainError if candidates is empty.
CandidatePool make_pool(std::string rule, std::vector<std::string> candidates);

// How a splittable cluster is ranked when picking the next split target.
enum class ClusterScoring { Product, SizeOnly, ScoreOnly };

struct SelectionConfig {
    int b0 = 8;        // initial generated tests
    int b = 8;         // additional test budget
    int k = 3;         // representatives sampled from the target cluster
    int patience = 1;  // consecutive failed split attempts before stopping

    ClusterScoring scoring = ClusterScoring::Product;
    bool no_judge = false;            // ablation: winner = argmax score
    bool no_expected_labels = false;  // ablation: ignore generated labels
    bool top3_only = false;           // ablation: restrict pool after phase 1
    int revise_rounds = 0;            // sequential revision rounds for the winner

    uint64_t seed = 0;
    std::string task_id;  // keys the representative-sampling streams

    void validate() const;  // DomainError on b0 < 1, b < 0, k < 1, patience < 1, ...
};

struct Cluster {
    std::vector<size_t> members;  // ascending candidate indices
    std::string signature;        // one outcome code per test column
    double score = 0.0;           // shared by all members
};

// Candidates x tests outcome table with expected labels. Append-only in the
// test dimension; each cell is evaluated exactly once and cached. Candidates
// can be deactivated (pool restriction); later columns then leave their cells
// empty and traces render them as '-'.
class OutcomeMatrix {
  public:
    explicit OutcomeMatrix(size_t n_candidates);

    size_t candidate_count() const { return active_.size(); }
    size_t test_count() const { return tests_.size(); }
    const std::vector<TestCase>& tests() const { return tests_; }
    bool active(size_t candidate) const { return active_[candidate]; }
    bool present(size_t candidate, size_t test) const;
    const Outcome& outcome(size_t candidate, size_t test) const;  // DomainError if absent

    // Runs every active candidate on the test and appends the column; one
    // drc_eval is metered per engine run.
    void append(const TestCase& test, const std::vector<std::string>& candidates,
                BudgetLedger& ledger);
    // Appends a precomputed column for the active candidates (test doubles).
    void append_column(const TestCase& test, const std::vector<Outcome>& outcomes);

    void restrict_to(const std::vector<size_t>& keep);

    // Fraction of evaluated tests whose outcome matches the expected label;
    // ERROR matches nothing. 0.0 when the candidate has no evaluated tests.
    double score(size_t candidate) const;

    // Partition of the active candidates by exact outcome-vector equality,
    // ordered by descending size, then lowest member index.
    std::vector<Cluster> cluster() const;

    // Column as a length-N string of outcome codes, '-' for absent cells.
    std::string column_codes(size_t test) const;

  private:
    std::vector<std::vector<Outcome>> rows_;       // [candidate][test]
    std::vector<std::vector<char>> present_;       // parallel to rows_
    std::vector<bool> active_;
    std::vector<TestCase> tests_;
};

// Split target: highest-ranked cluster with at least two members, or nullopt
// when every cluster is a singleton. Ties break toward the first cluster in
// the deterministic cluster order.
std::optional<size_t> pick_target_cluster(const std::vector<Cluster>& clusters,
                                          ClusterScoring scoring);

struct SelectionResult {
    size_t winner = 0;   // index into the original pool
    std::string script;  // winning text (revised when revision rounds apply)
    // Every test evaluated during selection, in trace order (label auditing).
    std::vector<TestCase> tests;
    nlohmann::json trace;
};

// Best-of-N selection by adaptive cluster splitting:
//   phase 1: B0 generated tests over the whole pool, cluster by outcomes;
//   phase 2: while tests < B0+B and q < patience, pick the target cluster,
//            sample min(K, |C|) representatives, request a distinguishing
//            test, evaluate everyone, recluster (q resets on a real split);
//   phase 3: top-3 finalists by score, judge over the tests where finalists
//            differ, then optional sequential revision of the winner.
// The trace records tests, clusters per step, q history, finalists, the
// differing-test ids, the winner, and the test-slot budget consumed.
SelectionResult split_tester(const CandidatePool& pool, const SelectionConfig& cfg,
                             Oracle& oracle);

// Baseline: m generated tests, winner = argmax score (ties -> lowest index).
SelectionResult generated_tests_select(const CandidatePool& pool, int m, Oracle& oracle);

// Baseline: tournament of k-way judge calls without any tests or evaluations.
// Groups are consecutive; a trailing group of one advances without a call.
SelectionResult judge_tournament(const CandidatePool& pool, Oracle& oracle, int k = 4);

// Baseline: B0 initial tests pick the top-3; an interactive loop then edits
// one current test for up to B rounds, each reply either deciding the winner
// or replacing the test (evaluated on the finalists only). Budget exhaustion
// falls back to a judge call over the evidence where the finalists differ.
SelectionResult codemonkey_select(const CandidatePool& pool, const SelectionConfig& cfg,
                                  Oracle& oracle);

// Baseline: B0 initial tests and clustering; one representative per cluster;
// extra distinguishing tests are requested only for representative pairs that
// already disagree; a pairwise knockout picks the winning representative and
// the highest-scored member of its cluster wins.
SelectionResult sstar_select(const CandidatePool& pool, const SelectionConfig& cfg,
                             Oracle& oracle);

// Baseline: the first sample, ignoring everything else.
SelectionResult sample1_select(const CandidatePool& pool);

// Up to `rounds` revise calls against the fixed test set; a proposal replaces
// the current script only when its score strictly improves. Engine runs are
// metered in the ledger. Stops early once nothing fails.
std::string sequential_revision(const std::string& rule, std::string script,
                                const std::vector<TestCase>& tests, int rounds, Oracle& oracle,
                                BudgetLedger& ledger);

}  // namespace drc
