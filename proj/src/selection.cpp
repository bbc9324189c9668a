#include "drc/selection.hpp"

#include <algorithm>
#include <map>

#include "drc/lang.hpp"
#include "drc/rng.hpp"

namespace drc {

namespace {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Violation: return "VIOLATION";
        case Verdict::Error: return "ERROR";
    }
    return "ERROR";
}

nlohmann::json cluster_snapshot(const std::vector<Cluster>& clusters) {
    nlohmann::json out = nlohmann::json::array();
    for (const Cluster& c : clusters) {
        out.push_back(nlohmann::json{
            {"members", c.members}, {"score", c.score}, {"signature", c.signature}});
    }
    return out;
}

nlohmann::json tests_json(const OutcomeMatrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (size_t t = 0; t < m.test_count(); ++t) {
        const TestCase& tc = m.tests()[t];
        nlohmann::json entry{{"origin", test_origin_name(tc.origin)},
                             {"expected", verdict_name(tc.expected)},
                             {"outcomes_by_candidate", m.column_codes(t)}};
        if (tc.origin == TestOrigin::SplitAttempt && tc.origin_cluster >= 0) {
            entry["origin_cluster"] = tc.origin_cluster;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

nlohmann::json make_trace(const nlohmann::json& tests, const nlohmann::json& cluster_steps,
                          const std::vector<int>& q_history,
                          const std::vector<size_t>& finalists,
                          const std::vector<size_t>& x_delta, size_t winner,
                          size_t budget_used) {
    return nlohmann::json{
        {"tests", tests},
        {"clusters_per_step", cluster_steps},
        {"q_history", q_history},
        {"finalists", finalists},
        {"x_delta_test_ids", x_delta},
        {"winner", winner},
        {"budget_used", budget_used},
    };
}

// Phase 1 of the test-based agents: b0 generation slots; a TestGenExhausted
// slot is consumed without producing a test.
void run_initial_tests(OutcomeMatrix& m, const CandidatePool& pool, int b0, Oracle& oracle) {
    for (int i = 0; i < b0; ++i) {
        try {
            TestCase t = oracle.gen_test(pool.rule, {});
            t.origin = TestOrigin::Initial;
            m.append(t, pool.candidates, oracle.ledger());
        } catch (const TestGenExhausted&) {
        }
    }
}

// Active candidates ordered by (score desc, index asc), truncated to `take`.
std::vector<size_t> top_by_score(const OutcomeMatrix& m, size_t take) {
    std::vector<size_t> order;
    for (size_t i = 0; i < m.candidate_count(); ++i) {
        if (m.active(i)) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double sa = m.score(a), sb = m.score(b);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    if (order.size() > take) order.resize(take);
    return order;
}

size_t checked_judge_index(int idx, size_t n) {
    if (idx < 0 || static_cast<size_t>(idx) >= n) {
        throw DomainError("judge returned an out-of-range finalist index");
    }
    return static_cast<size_t>(idx);
}

bool members_span_multiple(const std::vector<Cluster>& clusters,
                           const std::vector<size_t>& members) {
    int touched = 0;
    for (const Cluster& c : clusters) {
        for (size_t m : members) {
            if (std::binary_search(c.members.begin(), c.members.end(), m)) {
                ++touched;
                break;
            }
        }
        if (touched >= 2) return true;
    }
    return false;
}

// Tests (by matrix index) on which at least two of the given candidates have
// differing outcomes.
std::vector<size_t> differing_tests(const OutcomeMatrix& m, const std::vector<size_t>& group) {
    std::vector<size_t> out;
    for (size_t t = 0; t < m.test_count(); ++t) {
        bool differs = false;
        for (size_t i = 1; i < group.size() && !differs; ++i) {
            differs = m.outcome(group[i], t) != m.outcome(group[0], t);
        }
        if (differs) out.push_back(t);
    }
    return out;
}

std::vector<JudgeEvidence> evidence_for(const OutcomeMatrix& m,
                                        const std::vector<size_t>& finalists,
                                        const std::vector<size_t>& test_ids) {
    std::vector<JudgeEvidence> out;
    out.reserve(test_ids.size());
    for (size_t t : test_ids) {
        JudgeEvidence e;
        e.test = m.tests()[t];
        for (size_t f : finalists) e.outcomes.push_back(m.outcome(f, t));
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<std::string> texts_of(const CandidatePool& pool, const std::vector<size_t>& idx) {
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(pool.candidates[i]);
    return out;
}

}  // namespace

CandidatePool make_pool(std::string rule, std::vector<std::string> candidates) {
    if (candidates.empty()) throw DomainError("candidate pool must not be empty");
    CandidatePool pool;
    pool.rule = std::move(rule);
    pool.candidates = std::move(candidates);
    pool.compiles.reserve(pool.candidates.size());
    for (const std::string& c : pool.candidates) {
        bool ok = true;
        try {
            compile(c);
        } catch (const Error&) {
            ok = false;
        }
        pool.compiles.push_back(ok);
    }
    return pool;
}

void SelectionConfig::validate() const {
    if (b0 < 1) throw DomainError("selection config: b0 must be >= 1");
    if (b < 0) throw DomainError("selection config: b must be >= 0");
    if (k < 1) throw DomainError("selection config: k must be >= 1");
    if (patience < 1) throw DomainError("selection config: patience must be >= 1");
    if (revise_rounds < 0) throw DomainError("selection config: revise_rounds must be >= 0");
}

OutcomeMatrix::OutcomeMatrix(size_t n_candidates)
    : rows_(n_candidates), present_(n_candidates), active_(n_candidates, true) {
    if (n_candidates == 0) throw DomainError("outcome matrix needs at least one candidate");
}

bool OutcomeMatrix::present(size_t candidate, size_t test) const {
    return present_.at(candidate).at(test) != 0;
}

const Outcome& OutcomeMatrix::outcome(size_t candidate, size_t test) const {
    if (!present(candidate, test)) {
        throw DomainError("outcome matrix cell was never evaluated");
    }
    return rows_[candidate][test];
}

void OutcomeMatrix::append(const TestCase& test, const std::vector<std::string>& candidates,
                           BudgetLedger& ledger) {
    if (candidates.size() != rows_.size()) {
        throw DomainError("outcome matrix: candidate list size mismatch");
    }
    const int64_t n = static_cast<int64_t>(rows_.size());
    std::vector<Outcome> col(rows_.size());
    std::vector<char> got(rows_.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < n; ++i) {
        if (!active_[static_cast<size_t>(i)]) continue;
        col[static_cast<size_t>(i)] = phi(test.layout, candidates[static_cast<size_t>(i)]);
        got[static_cast<size_t>(i)] = 1;
    }
    for (size_t i = 0; i < rows_.size(); ++i) {
        if (got[i]) ledger.add_drc_eval();
        rows_[i].push_back(col[i]);
        present_[i].push_back(got[i]);
    }
    tests_.push_back(test);
}

void OutcomeMatrix::append_column(const TestCase& test, const std::vector<Outcome>& outcomes) {
    if (outcomes.size() != rows_.size()) {
        throw DomainError("outcome matrix: outcome column size mismatch");
    }
    for (size_t i = 0; i < rows_.size(); ++i) {
        rows_[i].push_back(outcomes[i]);
        present_[i].push_back(active_[i] ? 1 : 0);
    }
    tests_.push_back(test);
}

void OutcomeMatrix::restrict_to(const std::vector<size_t>& keep) {
    std::vector<bool> next(active_.size(), false);
    for (size_t i : keep) {
        if (i >= active_.size()) throw DomainError("restriction index out of range");
        next[i] = true;
    }
    active_ = std::move(next);
}

double OutcomeMatrix::score(size_t candidate) const {
    const auto& row = rows_.at(candidate);
    const auto& mask = present_.at(candidate);
    int evaluated = 0, matched = 0;
    for (size_t t = 0; t < row.size(); ++t) {
        if (!mask[t]) continue;
        ++evaluated;
        matched += row[t].verdict == tests_[t].expected;  // ERROR matches nothing
    }
    return evaluated == 0 ? 0.0 : static_cast<double>(matched) / evaluated;
}

std::vector<Cluster> OutcomeMatrix::cluster() const {
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < rows_.size(); ++i) {
        if (!active_[i]) continue;
        std::string sig;
        sig.reserve(tests_.size());
        for (size_t t = 0; t < tests_.size(); ++t) {
            sig += present_[i][t] ? outcome_code(rows_[i][t]) : '-';
        }
        groups[sig].push_back(i);
    }
    std::vector<Cluster> out;
    out.reserve(groups.size());
    for (auto& [sig, members] : groups) {
        Cluster c;
        c.score = score(members[0]);
        c.signature = sig;
        c.members = std::move(members);
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.members[0] < b.members[0];
    });
    return out;
}

std::string OutcomeMatrix::column_codes(size_t test) const {
    std::string out;
    out.reserve(rows_.size());
    for (size_t i = 0; i < rows_.size(); ++i) {
        out += present_[i][test] ? outcome_code(rows_[i][test]) : '-';
    }
    return out;
}

std::optional<size_t> pick_target_cluster(const std::vector<Cluster>& clusters,
                                          ClusterScoring scoring) {
    std::optional<size_t> best;
    double best_value = 0.0;
    for (size_t i = 0; i < clusters.size(); ++i) {
        const size_t size = clusters[i].members.size();
        if (size < 2) continue;  // singletons cannot be split further
        double value = 0.0;
        switch (scoring) {
            case ClusterScoring::Product:
                value = clusters[i].score * static_cast<double>(size);
                break;
            case ClusterScoring::SizeOnly: value = static_cast<double>(size); break;
            case ClusterScoring::ScoreOnly: value = clusters[i].score; break;
        }
        if (!best || value > best_value) {
            best = i;
            best_value = value;
        }
    }
    return best;
}

SelectionResult split_tester(const CandidatePool& pool, const SelectionConfig& cfg,
                             Oracle& oracle) {
    cfg.validate();
    const size_t n = pool.candidates.size();
    if (n == 0) throw DomainError("split_tester: empty pool");

    if (n == 1) {
        SelectionResult res;
        res.winner = 0;
        res.script = pool.candidates[0];
        if (cfg.revise_rounds > 0) {
            res.script = sequential_revision(pool.rule, res.script, {}, cfg.revise_rounds,
                                             oracle, oracle.ledger());
        }
        res.trace = make_trace(nlohmann::json::array(), nlohmann::json::array(), {}, {0}, {}, 0,
                               0);
        return res;
    }

    OutcomeMatrix matrix(n);
    size_t budget_used = static_cast<size_t>(cfg.b0);
    run_initial_tests(matrix, pool, cfg.b0, oracle);

    // forced by the no-expected-labels ablation: generated labels are not
    // trusted, so cluster mass is the only usable target signal
    const ClusterScoring scoring =
        cfg.no_expected_labels ? ClusterScoring::SizeOnly : cfg.scoring;

    if (cfg.top3_only) matrix.restrict_to(top_by_score(matrix, 3));

    std::vector<Cluster> clusters = matrix.cluster();
    nlohmann::json cluster_steps = nlohmann::json::array();
    cluster_steps.push_back(cluster_snapshot(clusters));

    std::vector<int> q_history;
    int q = 0;
    uint64_t iteration = 0;
    const size_t budget_cap = static_cast<size_t>(cfg.b0) + static_cast<size_t>(cfg.b);
    while (budget_used < budget_cap && q < cfg.patience) {
        const std::optional<size_t> target = pick_target_cluster(clusters, scoring);
        if (!target) break;
        const std::vector<size_t> target_members = clusters[*target].members;

        Rng rng(mix_seed(cfg.seed, hash_str(cfg.task_id), iteration));
        std::vector<size_t> reps = target_members;
        rng.shuffle(reps);
        reps.resize(std::min<size_t>(static_cast<size_t>(cfg.k), reps.size()));

        ++budget_used;
        try {
            TestCase t = oracle.gen_test(pool.rule, texts_of(pool, reps));
            t.origin = TestOrigin::SplitAttempt;
            t.origin_cluster = static_cast<int>(*target);
            matrix.append(t, pool.candidates, oracle.ledger());
            const std::vector<Cluster> next = matrix.cluster();
            q = members_span_multiple(next, target_members) ? 0 : q + 1;
            clusters = next;
        } catch (const TestGenExhausted&) {
            ++q;  // the slot is spent and the target was not split
        }
        q_history.push_back(q);
        cluster_steps.push_back(cluster_snapshot(clusters));
        ++iteration;
    }

    // Phase 3: finalists
    std::vector<size_t> finalists;
    if (cfg.no_expected_labels) {
        const size_t take = std::min<size_t>(3, clusters.size());
        for (size_t pass = 0; finalists.size() < 3; ++pass) {
            bool added = false;
            for (size_t c = 0; c < take && finalists.size() < 3; ++c) {
                if (pass < clusters[c].members.size()) {
                    finalists.push_back(clusters[c].members[pass]);
                    added = true;
                }
            }
            if (!added) break;
        }
    } else {
        finalists = top_by_score(matrix, 3);
    }

    const std::vector<size_t> x_delta = differing_tests(matrix, finalists);

    size_t winner;
    if (finalists.size() == 1) {
        winner = finalists[0];
    } else if (cfg.no_judge) {
        winner = cfg.no_expected_labels ? finalists[0] : top_by_score(matrix, 1)[0];
    } else {
        std::vector<double> scores;
        for (size_t f : finalists) {
            scores.push_back(cfg.no_expected_labels ? 0.0 : matrix.score(f));
        }
        const int idx = oracle.judge(pool.rule, texts_of(pool, finalists),
                                     evidence_for(matrix, finalists, x_delta), scores);
        winner = finalists[checked_judge_index(idx, finalists.size())];
    }

    SelectionResult res;
    res.winner = winner;
    res.script = pool.candidates[winner];
    res.tests = matrix.tests();
    if (cfg.revise_rounds > 0) {
        res.script = sequential_revision(pool.rule, res.script, matrix.tests(),
                                         cfg.revise_rounds, oracle, oracle.ledger());
    }
    res.trace = make_trace(tests_json(matrix), cluster_steps, q_history, finalists, x_delta,
                           winner, budget_used);
    return res;
}

SelectionResult generated_tests_select(const CandidatePool& pool, int m, Oracle& oracle) {
    if (m < 0) throw DomainError("generated_tests_select: test budget must be >= 0");
    const size_t n = pool.candidates.size();
    if (n == 0) throw DomainError("generated_tests_select: empty pool");

    OutcomeMatrix matrix(n);
    run_initial_tests(matrix, pool, m, oracle);
    const size_t winner = top_by_score(matrix, 1)[0];

    SelectionResult res;
    res.winner = winner;
    res.script = pool.candidates[winner];
    res.tests = matrix.tests();
    nlohmann::json steps = nlohmann::json::array();
    steps.push_back(cluster_snapshot(matrix.cluster()));
    res.trace = make_trace(tests_json(matrix), steps, {}, {winner}, {}, winner,
                           static_cast<size_t>(m));
    return res;
}

SelectionResult judge_tournament(const CandidatePool& pool, Oracle& oracle, int k) {
    if (k < 2) throw DomainError("judge_tournament: group size must be >= 2");
    const size_t n = pool.candidates.size();
    if (n == 0) throw DomainError("judge_tournament: empty pool");

    std::vector<size_t> alive(n);
    for (size_t i = 0; i < n; ++i) alive[i] = i;
    std::vector<size_t> last_group = alive;
    while (alive.size() > 1) {
        std::vector<size_t> next;
        for (size_t g = 0; g < alive.size(); g += static_cast<size_t>(k)) {
            std::vector<size_t> group(
                alive.begin() + static_cast<std::ptrdiff_t>(g),
                alive.begin() +
                    static_cast<std::ptrdiff_t>(std::min(alive.size(), g + static_cast<size_t>(k))));
            if (group.size() == 1) {
                next.push_back(group[0]);
                continue;
            }
            last_group = group;
            const int idx = oracle.judge(pool.rule, texts_of(pool, group), {},
                                         std::vector<double>(group.size(), 0.0));
            next.push_back(group[checked_judge_index(idx, group.size())]);
        }
        alive = std::move(next);
    }

    SelectionResult res;
    res.winner = alive[0];
    res.script = pool.candidates[res.winner];
    res.trace = make_trace(nlohmann::json::array(), nlohmann::json::array(), {}, last_group, {},
                           res.winner, 0);
    return res;
}

SelectionResult codemonkey_select(const CandidatePool& pool, const SelectionConfig& cfg,
                                  Oracle& oracle) {
    cfg.validate();
    const size_t n = pool.candidates.size();
    if (n == 0) throw DomainError("codemonkey_select: empty pool");

    OutcomeMatrix matrix(n);
    size_t budget_used = static_cast<size_t>(cfg.b0);
    run_initial_tests(matrix, pool, cfg.b0, oracle);

    const std::vector<size_t> finalists = top_by_score(matrix, 3);
    const std::vector<std::string> finalist_texts = texts_of(pool, finalists);
    std::vector<double> finalist_scores;
    for (size_t f : finalists) finalist_scores.push_back(matrix.score(f));

    // evidence: every initial test with the finalists' outcomes
    std::vector<size_t> all_tests(matrix.test_count());
    for (size_t t = 0; t < all_tests.size(); ++t) all_tests[t] = t;
    std::vector<JudgeEvidence> evidence = evidence_for(matrix, finalists, all_tests);

    matrix.restrict_to(finalists);  // edited tests are evaluated on finalists only

    std::optional<size_t> decided;
    if (matrix.test_count() > 0 && finalists.size() > 1) {
        TestCase current = matrix.tests().back();
        int edits = 0;
        while (edits < cfg.b) {
            const CodemonkeyStep step =
                oracle.codemonkey_step(pool.rule, finalist_texts, current, evidence);
            if (step.decide) {
                decided = finalists[checked_judge_index(step.decision_index, finalists.size())];
                break;
            }
            ++edits;
            if (step.malformed) continue;  // edit burned, test unchanged
            TestCase replacement = step.replacement;
            replacement.origin = TestOrigin::Edited;
            ++budget_used;
            matrix.append(replacement, pool.candidates, oracle.ledger());
            JudgeEvidence e;
            e.test = replacement;
            for (size_t f : finalists) {
                e.outcomes.push_back(matrix.outcome(f, matrix.test_count() - 1));
            }
            evidence.push_back(std::move(e));
            current = replacement;
        }
    }

    std::vector<size_t> x_delta;
    size_t winner;
    if (decided) {
        winner = *decided;
    } else if (finalists.size() == 1) {
        winner = finalists[0];
    } else {
        x_delta = differing_tests(matrix, finalists);
        const int idx = oracle.judge(pool.rule, finalist_texts,
                                     evidence_for(matrix, finalists, x_delta), finalist_scores);
        winner = finalists[checked_judge_index(idx, finalists.size())];
    }

    SelectionResult res;
    res.winner = winner;
    res.script = pool.candidates[winner];
    res.tests = matrix.tests();
    res.trace = make_trace(tests_json(matrix), nlohmann::json::array(), {}, finalists, x_delta,
                           winner, budget_used);
    return res;
}

SelectionResult sstar_select(const CandidatePool& pool, const SelectionConfig& cfg,
                             Oracle& oracle) {
    cfg.validate();
    const size_t n = pool.candidates.size();
    if (n == 0) throw DomainError("sstar_select: empty pool");

    OutcomeMatrix matrix(n);
    size_t budget_used = static_cast<size_t>(cfg.b0);
    run_initial_tests(matrix, pool, cfg.b0, oracle);

    const std::vector<Cluster> clusters = matrix.cluster();
    std::vector<size_t> reps;
    reps.reserve(clusters.size());
    for (const Cluster& c : clusters) reps.push_back(c.members[0]);

    // extra distinguishing tests only for representative pairs that already
    // disagree somewhere; every candidate is evaluated on each new test
    const size_t budget_cap = static_cast<size_t>(cfg.b0) + static_cast<size_t>(cfg.b);
    for (size_t i = 0; i < reps.size() && budget_used < budget_cap; ++i) {
        for (size_t j = i + 1; j < reps.size() && budget_used < budget_cap; ++j) {
            if (differing_tests(matrix, {reps[i], reps[j]}).empty()) continue;
            ++budget_used;
            try {
                TestCase t = oracle.gen_test(pool.rule, {pool.candidates[reps[i]],
                                                         pool.candidates[reps[j]]});
                t.origin = TestOrigin::SplitAttempt;
                matrix.append(t, pool.candidates, oracle.ledger());
            } catch (const TestGenExhausted&) {
            }
        }
    }

    // debiased pairwise knockout in representative order
    size_t current = reps[0];
    for (size_t r = 1; r < reps.size(); ++r) {
        const size_t challenger = reps[r];
        const std::vector<size_t> diff = differing_tests(matrix, {current, challenger});
        const PairwiseVerdict v =
            oracle.pairwise_judge(pool.rule, pool.candidates[current],
                                  pool.candidates[challenger],
                                  evidence_for(matrix, {current, challenger}, diff));
        if (v == PairwiseVerdict::B) {
            current = challenger;
        } else if (v == PairwiseVerdict::Tie) {
            const double sc = matrix.score(current), sl = matrix.score(challenger);
            if (sl > sc || (sl == sc && challenger < current)) current = challenger;
        }
    }

    // winner: highest-scored member of the winning representative's cluster
    size_t winner = current;
    for (const Cluster& c : clusters) {
        if (!std::binary_search(c.members.begin(), c.members.end(), current)) continue;
        double best = -1.0;
        for (size_t m : c.members) {
            const double s = matrix.score(m);
            if (s > best) {
                best = s;
                winner = m;
            }
        }
        break;
    }

    SelectionResult res;
    res.winner = winner;
    res.script = pool.candidates[winner];
    res.tests = matrix.tests();
    nlohmann::json steps = nlohmann::json::array();
    steps.push_back(cluster_snapshot(clusters));
    res.trace = make_trace(tests_json(matrix), steps, {}, reps, {}, winner, budget_used);
    return res;
}

SelectionResult sample1_select(const CandidatePool& pool) {
    if (pool.candidates.empty()) throw DomainError("sample1_select: empty pool");
    SelectionResult res;
    res.winner = 0;
    res.script = pool.candidates[0];
    res.trace = make_trace(nlohmann::json::array(), nlohmann::json::array(), {}, {0}, {}, 0, 0);
    return res;
}

std::string sequential_revision(const std::string& rule, std::string script,
                                const std::vector<TestCase>& tests, int rounds, Oracle& oracle,
                                BudgetLedger& ledger) {
    if (rounds <= 0 || tests.empty()) return script;

    const auto evaluate = [&](const std::string& s,
                              std::vector<std::pair<TestCase, Outcome>>& failing) {
        failing.clear();
        int matched = 0;
        for (const TestCase& t : tests) {
            const Outcome o = phi(t.layout, s);
            ledger.add_drc_eval();
            if (o.verdict == t.expected) {
                ++matched;
            } else {
                failing.emplace_back(t, o);
            }
        }
        return static_cast<double>(matched) / static_cast<double>(tests.size());
    };

    std::vector<std::pair<TestCase, Outcome>> failing;
    double current = evaluate(script, failing);
    for (int r = 0; r < rounds; ++r) {
        if (failing.empty()) break;
        const std::string proposal = oracle.revise(rule, script, failing);
        if (proposal == script) continue;  // round consumed, nothing to re-check
        std::vector<std::pair<TestCase, Outcome>> proposal_failing;
        const double improved = evaluate(proposal, proposal_failing);
        if (improved > current) {  // strict improvement required
            script = proposal;
            current = improved;
            failing = std::move(proposal_failing);
        }
    }
    return script;
}

}  // namespace drc
