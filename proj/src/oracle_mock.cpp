#include "drc/oracle_mock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "drc/layout_io.hpp"
#include "drc/rng.hpp"

namespace drc {

namespace {

using SiteKind = CheckSite::Kind;

// ---- threshold slots -------------------------------------------------------
// A "slot" is a length that a mutation may nudge: every check threshold and
// every negative sizing delta (the enclosure-rewrite distance). Collection and
// rebuild walk the AST in the same deterministic order.

void collect_slots_expr(const ExprPtr& e, std::vector<Coord>& out) {
    switch (e->kind) {
        case Expr::Kind::Layer: return;
        case Expr::Kind::Binary:
            collect_slots_expr(e->lhs, out);
            collect_slots_expr(e->rhs, out);
            return;
        case Expr::Kind::Sized:
            collect_slots_expr(e->base, out);
            if (e->delta < 0) out.push_back(e->delta);
            return;
        case Expr::Kind::Check:
            collect_slots_expr(e->base, out);
            if (e->other) collect_slots_expr(e->other, out);
            out.push_back(e->dist);
            return;
    }
}

std::vector<Coord> collect_slots(const ScriptAst& ast) {
    std::vector<Coord> out;
    for (const Stmt& st : ast.statements) {
        if (st.expr) collect_slots_expr(st.expr, out);
    }
    return out;
}

ExprPtr rebuild_slot_expr(const ExprPtr& e, size_t target, Coord value, size_t& counter) {
    switch (e->kind) {
        case Expr::Kind::Layer: return e;
        case Expr::Kind::Binary: {
            ExprPtr l = rebuild_slot_expr(e->lhs, target, value, counter);
            ExprPtr r = rebuild_slot_expr(e->rhs, target, value, counter);
            if (l == e->lhs && r == e->rhs) return e;
            return Expr::make_binary(e->op, l, r);
        }
        case Expr::Kind::Sized: {
            ExprPtr b = rebuild_slot_expr(e->base, target, value, counter);
            Coord d = e->delta;
            if (e->delta < 0 && counter++ == target) d = value;
            if (b == e->base && d == e->delta) return e;
            return Expr::make_sized(b, d);
        }
        case Expr::Kind::Check: {
            ExprPtr b = rebuild_slot_expr(e->base, target, value, counter);
            ExprPtr o = e->other ? rebuild_slot_expr(e->other, target, value, counter) : nullptr;
            Coord d = e->dist;
            if (counter++ == target) d = value;
            if (b == e->base && o == e->other && d == e->dist) return e;
            return Expr::make_check(e->check, b, o, d);
        }
    }
    return e;
}

ScriptAst with_slot(const ScriptAst& ast, size_t target, Coord value) {
    ScriptAst out = ast;
    size_t counter = 0;
    for (Stmt& st : out.statements) {
        if (st.expr) st.expr = rebuild_slot_expr(st.expr, target, value, counter);
    }
    return out;
}

// ---- structural mutations --------------------------------------------------
// Each edit family counts its own node kind in walk order, so a target index
// always names exactly one node.

enum class NodeEdit { SpacingSepSwap, EnclosedSwap, SubSwap };

ExprPtr rebuild_edit_expr(const ExprPtr& e, NodeEdit edit, size_t target, size_t& counter) {
    switch (e->kind) {
        case Expr::Kind::Layer: return e;
        case Expr::Kind::Binary: {
            ExprPtr l = rebuild_edit_expr(e->lhs, edit, target, counter);
            ExprPtr r = rebuild_edit_expr(e->rhs, edit, target, counter);
            if (edit == NodeEdit::SubSwap && e->op == BoolOp::Sub && counter++ == target) {
                return Expr::make_binary(e->op, r, l);
            }
            if (l == e->lhs && r == e->rhs) return e;
            return Expr::make_binary(e->op, l, r);
        }
        case Expr::Kind::Sized: {
            ExprPtr b = rebuild_edit_expr(e->base, edit, target, counter);
            if (b == e->base) return e;
            return Expr::make_sized(b, e->delta);
        }
        case Expr::Kind::Check: {
            ExprPtr b = rebuild_edit_expr(e->base, edit, target, counter);
            ExprPtr o = e->other ? rebuild_edit_expr(e->other, edit, target, counter) : nullptr;
            if (edit == NodeEdit::SpacingSepSwap &&
                (e->check == CheckKind::Spacing || e->check == CheckKind::Separation)) {
                if (counter++ == target) {
                    if (e->check == CheckKind::Spacing) {
                        return Expr::make_check(CheckKind::Separation, b,
                                                Expr::make_layer("bgx"), e->dist);
                    }
                    return Expr::make_check(CheckKind::Spacing, b, nullptr, e->dist);
                }
            }
            if (edit == NodeEdit::EnclosedSwap && e->check == CheckKind::Enclosed) {
                if (counter++ == target) return Expr::make_check(e->check, o, b, e->dist);
            }
            if (b == e->base && o == e->other) return e;
            return Expr::make_check(e->check, b, o, e->dist);
        }
    }
    return e;
}

ScriptAst with_edit(const ScriptAst& ast, NodeEdit edit, size_t target) {
    ScriptAst out = ast;
    size_t counter = 0;
    for (Stmt& st : out.statements) {
        if (st.expr) st.expr = rebuild_edit_expr(st.expr, edit, target, counter);
    }
    return out;
}

size_t count_edit_targets_expr(const ExprPtr& e, NodeEdit edit) {
    switch (e->kind) {
        case Expr::Kind::Layer: return 0;
        case Expr::Kind::Binary:
            return count_edit_targets_expr(e->lhs, edit) + count_edit_targets_expr(e->rhs, edit) +
                   (edit == NodeEdit::SubSwap && e->op == BoolOp::Sub ? 1 : 0);
        case Expr::Kind::Sized: return count_edit_targets_expr(e->base, edit);
        case Expr::Kind::Check: {
            size_t n = count_edit_targets_expr(e->base, edit) +
                       (e->other ? count_edit_targets_expr(e->other, edit) : 0);
            if (edit == NodeEdit::SpacingSepSwap &&
                (e->check == CheckKind::Spacing || e->check == CheckKind::Separation)) {
                ++n;
            }
            if (edit == NodeEdit::EnclosedSwap && e->check == CheckKind::Enclosed) ++n;
            return n;
        }
    }
    return 0;
}

size_t count_edit_targets(const ScriptAst& ast, NodeEdit edit) {
    size_t n = 0;
    for (const Stmt& st : ast.statements) {
        if (st.expr) n += count_edit_targets_expr(st.expr, edit);
    }
    return n;
}

Verdict flip(Verdict v) { return v == Verdict::Pass ? Verdict::Violation : Verdict::Pass; }

bool topology_applicable(SiteKind k) {
    return k == SiteKind::Spacing || k == SiteKind::Separation || k == SiteKind::Enclosed ||
           k == SiteKind::Containment;
}

std::vector<CornerSpec> topology_corners(SiteKind k) {
    switch (k) {
        case SiteKind::Width: return {};
        case SiteKind::Spacing: return {CornerSpec::disjoint_far()};
        case SiteKind::Separation:
            return {CornerSpec::partial_overlap(), CornerSpec::contained(),
                    CornerSpec::disjoint_far()};
        case SiteKind::Enclosed:
            return {CornerSpec::partial_overlap(), CornerSpec::disjoint_far()};
        case SiteKind::Containment:
            return {CornerSpec::partial_overlap(), CornerSpec::contained(),
                    CornerSpec::disjoint_far()};
    }
    return {};
}

uint64_t approx_tokens(const std::string& text) { return text.size() / 4; }

}  // namespace

MockOracle::MockOracle(MockConfig cfg, std::string gt_script, const std::string& task_id,
                       uint64_t run_seed)
    : cfg_(std::move(cfg)),
      gt_(std::move(gt_script)),
      task_hash_(hash_str(task_id)),
      seed_(run_seed) {
    try {
        gt_checked_ = compile(gt_);
        gt_ok_ = true;
        gt_sites_ = extract_check_sites(gt_checked_);
    } catch (const Error&) {
        gt_ok_ = false;
    }
    if (!gt_ok_ || gt_sites_.empty()) return;

    // Corner probes: the same geometry family the benchmark uses for its
    // hidden eval layouts, so "differs on the probes" matches "differs on the
    // eval layouts" for generated tasks.
    for (size_t k = 0; k < gt_sites_.size(); ++k) {
        const CheckSite& s = gt_sites_[k];
        std::vector<CornerSpec> specs;
        if (s.kind != SiteKind::Containment) {
            specs.push_back(CornerSpec::scalar(s.dist_nm - 1));
            specs.push_back(CornerSpec::scalar(s.dist_nm));
            specs.push_back(CornerSpec::scalar(s.dist_nm + 1));
        }
        for (const CornerSpec& t : topology_corners(s.kind)) specs.push_back(t);
        for (const CornerSpec& spec : specs) {
            try {
                probes_.push_back(corner_layout(gt_sites_, k, spec));
            } catch (const Error&) {
                // unrealizable corner (e.g. negative scalar); skip
            }
        }
    }
    try {
        probes_.push_back(compliant_layout(gt_sites_));
    } catch (const Error&) {
    }
    gt_on_probes_.reserve(probes_.size());
    const EvalMeter::Suspend unmetered;
    for (const Layout& p : probes_) {
        gt_on_probes_.push_back(run_script(gt_checked_, p).outcome.verdict);
    }
}

uint64_t MockOracle::next_call_seed() {
    const uint64_t idx = calls_.fetch_add(1, std::memory_order_relaxed);
    return mix_seed(seed_, task_hash_, idx);
}

Verdict MockOracle::gt_verdict(const Layout& lay) const {
    if (!gt_ok_) return Verdict::Pass;
    const EvalMeter::Suspend unmetered;
    const Verdict v = run_script(gt_checked_, lay).outcome.verdict;
    return v == Verdict::Error ? Verdict::Pass : v;
}

bool MockOracle::differs_from_gt_on_probes(const std::string& candidate) const {
    CheckedScript checked;
    try {
        checked = compile(candidate);
    } catch (const Error&) {
        return true;  // errors never match a PASS/VIOLATION reference verdict
    }
    const EvalMeter::Suspend unmetered;
    for (size_t i = 0; i < probes_.size(); ++i) {
        if (run_script(checked, probes_[i]).outcome.verdict != gt_on_probes_[i]) return true;
    }
    return probes_.empty();
}

std::string MockOracle::mutate_candidate(uint64_t slot_seed) const {
    const std::string broken = gt_ + "\n(";
    if (!gt_ok_) return broken;
    Rng rng(slot_seed);

    const std::vector<Coord> slots = collect_slots(gt_checked_.ast);
    const size_t method_swaps = count_edit_targets(gt_checked_.ast, NodeEdit::SpacingSepSwap);
    const size_t enclosed_swaps = count_edit_targets(gt_checked_.ast, NodeEdit::EnclosedSwap);
    const size_t sub_swaps = count_edit_targets(gt_checked_.ast, NodeEdit::SubSwap);
    std::vector<size_t> output_stmts;
    for (size_t i = 0; i < gt_checked_.ast.statements.size(); ++i) {
        if (gt_checked_.ast.statements[i].kind == Stmt::Kind::Output) output_stmts.push_back(i);
    }

    enum Op { Threshold, MethodSwap, EnclosedSwap, SubSwap, DropOutput, Syntax };
    std::vector<Op> menu;
    if (!slots.empty()) menu.insert(menu.end(), 4, Threshold);  // near-misses dominate
    if (method_swaps > 0) menu.push_back(MethodSwap);
    if (enclosed_swaps > 0) menu.push_back(EnclosedSwap);
    if (sub_swaps > 0) menu.push_back(SubSwap);
    if (!output_stmts.empty()) menu.push_back(DropOutput);
    menu.push_back(Syntax);

    for (int attempt = 0; attempt < 10; ++attempt) {
        std::string text;
        switch (menu[rng.below(menu.size())]) {
            case Threshold: {
                const size_t i = rng.below(slots.size());
                const Coord orig = slots[i];
                const int64_t mag_nm = std::abs(static_cast<int64_t>(orig)) / kUnitsPerNm;
                const int64_t delta = 1 + static_cast<int64_t>(rng.below(50));
                const int64_t nudged =
                    std::max<int64_t>(1, rng.below(2) ? mag_nm + delta : mag_nm - delta);
                const Coord value =
                    static_cast<Coord>((orig < 0 ? -1 : 1) * nudged * kUnitsPerNm);
                text = pretty_print(with_slot(gt_checked_.ast, i, value));
                break;
            }
            case MethodSwap:
                text = pretty_print(with_edit(gt_checked_.ast, NodeEdit::SpacingSepSwap,
                                              rng.below(method_swaps)));
                break;
            case EnclosedSwap:
                text = pretty_print(with_edit(gt_checked_.ast, NodeEdit::EnclosedSwap,
                                              rng.below(enclosed_swaps)));
                break;
            case SubSwap:
                text = pretty_print(
                    with_edit(gt_checked_.ast, NodeEdit::SubSwap, rng.below(sub_swaps)));
                break;
            case DropOutput: {
                ScriptAst ast = gt_checked_.ast;
                ast.statements.erase(ast.statements.begin() +
                                     static_cast<std::ptrdiff_t>(
                                         output_stmts[rng.below(output_stmts.size())]));
                text = pretty_print(ast);
                break;
            }
            case Syntax: text = broken; break;
        }
        if (differs_from_gt_on_probes(text)) return text;
    }
    return broken;
}

std::vector<std::string> MockOracle::gen_candidates(const std::string& rule, int n) {
    (void)rule;  // simulation keys off the hidden reference, not the prose
    if (n < 1) throw DomainError("gen_candidates: n must be >= 1");
    const uint64_t base = next_call_seed();

    int n_correct = static_cast<int>(std::llround(cfg_.correct_fraction * n));
    n_correct = std::clamp(n_correct, 0, n);

    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n_correct; ++i) {
        out.push_back(i == 0 ? gt_ : "# variant " + std::to_string(i) + "\n" + gt_);
    }
    for (int j = 0; n_correct + j < n; ++j) {
        out.push_back(
            mutate_candidate(mix_seed(base, cfg_.mutation_seed, static_cast<uint64_t>(j))));
    }
    Rng pos(mix_seed(base, 0x5e1ec7));
    pos.shuffle(out);
    for (const std::string& s : out) ledger_.add_llm_call(approx_tokens(s));
    return out;
}

TestCase MockOracle::make_corner_test(uint64_t call_seed,
                                      const std::vector<std::string>& context_candidates) {
    Rng rng(mix_seed(call_seed, 1));
    TestCase tc;
    tc.origin = context_candidates.empty() ? TestOrigin::Initial : TestOrigin::SplitAttempt;

    if (!gt_ok_ || gt_sites_.empty()) {
        Layout lay("mock-fallback");
        lay.add_rect("met1", Rect(0, 0, nm_to_units(100), nm_to_units(100)));
        tc.layout = std::move(lay);
    } else {
        const size_t s = static_cast<size_t>(rng.below(gt_sites_.size()));
        const CheckSite& site = gt_sites_[s];
        CornerSpec spec = CornerSpec::disjoint_far();
        const bool want_topology =
            site.kind == SiteKind::Containment ||
            (topology_applicable(site.kind) && rng.below(4) == 0);
        if (want_topology) {
            const std::vector<CornerSpec> topo = topology_corners(site.kind);
            spec = topo[rng.below(topo.size())];
        } else {
            // probe around the reference threshold and, for split requests,
            // around every parseable candidate's matching threshold
            std::vector<int64_t> values = {site.dist_nm};
            for (const std::string& cand : context_candidates) {
                try {
                    const std::vector<CheckSite> cs = extract_check_sites_text(cand);
                    if (s < cs.size() && cs[s].kind == site.kind && cs[s].dist_nm > 0) {
                        values.push_back(cs[s].dist_nm);
                    }
                } catch (const Error&) {
                }
            }
            const int64_t v = values[rng.below(values.size())] + rng.range(-1, 1);
            spec = CornerSpec::scalar(std::max<int64_t>(v, 0));
        }
        tc.layout = corner_layout(gt_sites_, s, spec, "mock-corner");
    }

    const Verdict truth = gt_verdict(tc.layout);
    tc.expected = rng.bernoulli(cfg_.label_error) ? flip(truth) : truth;
    return tc;
}

TestCase MockOracle::gen_test(const std::string& rule,
                              const std::vector<std::string>& context_candidates) {
    (void)rule;
    const uint64_t call_seed = next_call_seed();
    Rng fail_rng(mix_seed(call_seed, 0xFA11));
    if (fail_rng.bernoulli(cfg_.testgen_fail_prob)) {
        // a whole slot lost: five attempts, five retries burned
        for (int i = 0; i < 5; ++i) ledger_.add_llm_call(8);
        ledger_.add_test_retries(5);
        throw TestGenExhausted("mock test generation failed for this slot");
    }
    TestCase tc = make_corner_test(call_seed, context_candidates);
    ledger_.add_llm_call(approx_tokens(layout_to_json_text(tc.layout)));
    return tc;
}

int MockOracle::judge(const std::string& rule, const std::vector<std::string>& finalists,
                      const std::vector<JudgeEvidence>& evidence,
                      const std::vector<double>& scores) {
    (void)rule;
    (void)scores;  // the simulated judge is never malformed
    if (finalists.empty()) throw DomainError("judge: no finalists");
    next_call_seed();
    ledger_.add_llm_call(4);
    size_t best = 0;
    int64_t best_agree = -1;
    for (size_t f = 0; f < finalists.size(); ++f) {
        int64_t agree = 0;
        for (const JudgeEvidence& e : evidence) {
            if (f < e.outcomes.size() && e.outcomes[f].verdict == gt_verdict(e.test.layout)) {
                ++agree;
            }
        }
        if (agree > best_agree) {
            best_agree = agree;
            best = f;
        }
    }
    return static_cast<int>(best);
}

PairwiseVerdict MockOracle::pairwise_judge(const std::string& rule, const std::string& a,
                                           const std::string& b,
                                           const std::vector<JudgeEvidence>& evidence) {
    (void)rule;
    (void)a;
    (void)b;
    next_call_seed();
    ledger_.add_llm_call(2);
    int64_t agree_a = 0, agree_b = 0;
    for (const JudgeEvidence& e : evidence) {
        const Verdict truth = gt_verdict(e.test.layout);
        if (e.outcomes.size() >= 2) {
            agree_a += e.outcomes[0].verdict == truth;
            agree_b += e.outcomes[1].verdict == truth;
        }
    }
    if (agree_a > agree_b) return PairwiseVerdict::A;
    if (agree_b > agree_a) return PairwiseVerdict::B;
    return PairwiseVerdict::Tie;
}

CodemonkeyStep MockOracle::codemonkey_step(const std::string& rule,
                                           const std::vector<std::string>& finalists,
                                           const TestCase& current_test,
                                           const std::vector<JudgeEvidence>& evidence) {
    (void)rule;
    (void)current_test;
    const uint64_t call_seed = next_call_seed();
    ledger_.add_llm_call(8);

    // decide as soon as the evidence singles out one finalist
    if (!evidence.empty() && !finalists.empty()) {
        std::vector<int64_t> agree(finalists.size(), 0);
        for (const JudgeEvidence& e : evidence) {
            const Verdict truth = gt_verdict(e.test.layout);
            for (size_t f = 0; f < finalists.size() && f < e.outcomes.size(); ++f) {
                agree[f] += e.outcomes[f].verdict == truth;
            }
        }
        const auto best = std::max_element(agree.begin(), agree.end());
        if (std::count(agree.begin(), agree.end(), *best) == 1) {
            CodemonkeyStep step;
            step.decide = true;
            step.decision_index = static_cast<int>(best - agree.begin());
            return step;
        }
    }
    CodemonkeyStep step;
    step.replacement = make_corner_test(call_seed, finalists);
    step.replacement.origin = TestOrigin::Edited;
    return step;
}

std::string MockOracle::revise(const std::string& rule, const std::string& script,
                               const std::vector<std::pair<TestCase, Outcome>>& failing) {
    (void)rule;
    (void)failing;  // the simulated reviser steers by the hidden reference
    next_call_seed();
    ledger_.add_llm_call(approx_tokens(script));
    if (!gt_ok_) return script;
    ScriptAst ast;
    try {
        ast = parse(script);
    } catch (const Error&) {
        return script;
    }
    const std::vector<Coord> mine = collect_slots(ast);
    const std::vector<Coord> ref = collect_slots(gt_checked_.ast);
    size_t pick = mine.size();
    Coord best_gap = 0;
    for (size_t i = 0; i < mine.size() && i < ref.size(); ++i) {
        if (mine[i] == ref[i]) continue;
        const Coord gap = std::abs(mine[i] - ref[i]);
        if (pick == mine.size() || gap < best_gap) {
            pick = i;
            best_gap = gap;
        }
    }
    if (pick == mine.size()) return script;  // thresholds already agree
    const Coord step = static_cast<Coord>(kUnitsPerNm);
    const Coord value = mine[pick] + (ref[pick] > mine[pick] ? step : -step);
    return pretty_print(with_slot(ast, pick, value));
}

}  // namespace drc
