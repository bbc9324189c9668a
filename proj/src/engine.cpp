#include "drc/engine.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace drc {

namespace {

std::atomic<uint64_t> g_eval_count{0};
thread_local int g_eval_suspended = 0;

uint64_t sat_add(uint64_t a, uint64_t b) {
    const uint64_t s = a + b;
    return s < a ? UINT64_MAX : s;
}

// Squared distance between two half-open rects; 0 when touching or overlapping.
dist2_t rect_dist2(const Rect& a, const Rect& b) {
    uint64_t dx = 0, dy = 0;
    if (b.x0 >= a.x1) dx = static_cast<uint64_t>(static_cast<int64_t>(b.x0) - a.x1);
    else if (a.x0 >= b.x1) dx = static_cast<uint64_t>(static_cast<int64_t>(a.x0) - b.x1);
    if (b.y0 >= a.y1) dy = static_cast<uint64_t>(static_cast<int64_t>(b.y0) - a.y1);
    else if (a.y0 >= b.y1) dy = static_cast<uint64_t>(static_cast<int64_t>(a.y0) - b.y1);
    const unsigned __int128 d2 =
        static_cast<unsigned __int128>(dx) * dx + static_cast<unsigned __int128>(dy) * dy;
    return d2 > UINT64_MAX ? UINT64_MAX : static_cast<uint64_t>(d2);
}

// Closest pair of canonical rects across two regions; ties resolve to the
// first pair in scan order, which is deterministic by canonical form.
std::pair<Rect, Rect> closest_rect_pair(const std::vector<Rect>& as, const std::vector<Rect>& bs) {
    dist2_t best = UINT64_MAX;
    std::pair<Rect, Rect> out{as.front(), bs.front()};
    for (const Rect& a : as) {
        for (const Rect& b : bs) {
            const dist2_t d2 = rect_dist2(a, b);
            if (d2 < best) {
                best = d2;
                out = {a, b};
            }
        }
    }
    return out;
}

// One axis of the gap box: the shared range when the rects overlap on this
// axis, else the open range between them, widened to one 2-unit cell when the
// rects are exactly adjacent (markers must have positive area).
std::pair<Coord, Coord> gap_axis(Coord a0, Coord a1, Coord b0, Coord b1) {
    const Coord lo = std::max(a0, b0);
    const Coord hi = std::min(a1, b1);
    if (lo < hi) return {lo, hi};
    const Coord g0 = std::min(a1, b1);
    const Coord g1 = std::max(a0, b0);
    if (g0 < g1) return {g0, g1};
    if (g0 <= kCoordMax - 2) return {g0, static_cast<Coord>(g0 + 2)};
    return {static_cast<Coord>(g0 - 2), g0};
}

Rect gap_box(const Rect& a, const Rect& b) {
    const auto [x0, x1] = gap_axis(a.x0, a.x1, b.x0, b.x1);
    const auto [y0, y1] = gap_axis(a.y0, a.y1, b.y0, b.y1);
    return Rect(x0, y0, x1, y1);
}

// 2x2-unit (1 nm²) witness cell anchored at the contact point of two touching,
// non-overlapping rects.
Rect touch_witness(const Rect& a, const Rect& b) {
    Coord cx, cy;
    if (a.x1 == b.x0) cx = a.x1;
    else if (b.x1 == a.x0) cx = b.x1;
    else cx = std::max(a.x0, b.x0);
    if (a.y1 == b.y0) cy = a.y1;
    else if (b.y1 == a.y0) cy = b.y1;
    else cy = std::max(a.y0, b.y0);
    const Coord x0 = cx >= kCoordMin + 2 ? static_cast<Coord>(cx - 2) : cx;
    const Coord y0 = cy >= kCoordMin + 2 ? static_cast<Coord>(cy - 2) : cy;
    return Rect(x0, y0, static_cast<Coord>(x0 + 2), static_cast<Coord>(y0 + 2));
}

uint64_t pair_charge(const Region& a, const Region& b) {
    return sat_add(1, sat_add(a.rect_count(), b.rect_count()) +
                          std::min<uint64_t>(a.rect_count() * b.rect_count(), 1u << 20));
}

Region pairwise_markers(const Region& primary, const Region& other_or_self, Coord d,
                        StepMeter& meter, bool cross) {
    const uint64_t dd = static_cast<uint64_t>(d) * static_cast<uint64_t>(d);
    meter.charge(1 + primary.band_count());
    const std::vector<Region> comps_a = components(primary);
    std::vector<Region> comps_b_store;
    const std::vector<Region>* comps_b = &comps_a;
    if (cross) {
        meter.charge(1 + other_or_self.band_count());
        comps_b_store = components(other_or_self);
        comps_b = &comps_b_store;
    }
    std::vector<Rect> witnesses;
    for (size_t i = 0; i < comps_a.size(); ++i) {
        const size_t j0 = cross ? 0 : i + 1;
        for (size_t j = j0; j < comps_b->size(); ++j) {
            const Region& A = comps_a[i];
            const Region& B = (*comps_b)[j];
            meter.charge(pair_charge(A, B));
            const dist2_t d2 = min_dist_sq(A, B);
            if (d2 >= dd) continue;
            if (!cross && d2 == 0) continue;  // same-region components never touch
            if (d2 == 0) {
                meter.charge(1 + A.band_count() + B.band_count());
                const Region overlap = bool_op(BoolOp::And, A, B);
                if (!overlap.empty()) {
                    const std::vector<Rect> rs = overlap.rects();
                    witnesses.insert(witnesses.end(), rs.begin(), rs.end());
                    continue;
                }
                const auto [ra, rb] = closest_rect_pair(A.rects(), B.rects());
                witnesses.push_back(touch_witness(ra, rb));
            } else {
                const auto [ra, rb] = closest_rect_pair(A.rects(), B.rects());
                witnesses.push_back(gap_box(ra, rb));
            }
        }
    }
    meter.charge(1 + witnesses.size());
    return Region::from_rects(witnesses);
}

RunResult error_result(ErrorKind kind, std::string message, uint64_t steps) {
    RunResult rr;
    rr.outcome = Outcome::make_error(kind);
    rr.error_message = std::move(message);
    rr.stats.eval_steps = steps;
    return rr;
}

}  // namespace

char outcome_code(const Outcome& o) {
    switch (o.verdict) {
        case Verdict::Pass: return 'P';
        case Verdict::Violation: return 'V';
        case Verdict::Error: return 'E';
    }
    return '?';
}

std::string to_string(const Outcome& o) {
    switch (o.verdict) {
        case Verdict::Pass: return "PASS";
        case Verdict::Violation: return "VIOLATION";
        case Verdict::Error:
            switch (o.error) {
                case ErrorKind::Parse: return "ERROR(parse)";
                case ErrorKind::Semantic: return "ERROR(semantic)";
                default: return "ERROR(runtime)";
            }
    }
    return "?";
}

Outcome outcome_from_code(char c) {
    switch (c) {
        case 'P': return Outcome::pass();
        case 'V': return Outcome::violation();
        case 'E': return Outcome::make_error(ErrorKind::Runtime);
        default: throw DomainError(std::string("unknown outcome code '") + c + "'");
    }
}

void EvalMeter::bump() {
    if (g_eval_suspended == 0) g_eval_count.fetch_add(1, std::memory_order_relaxed);
}
uint64_t EvalMeter::count() { return g_eval_count.load(std::memory_order_relaxed); }
void EvalMeter::reset() { g_eval_count.store(0, std::memory_order_relaxed); }
EvalMeter::Suspend::Suspend() { ++g_eval_suspended; }
EvalMeter::Suspend::~Suspend() { --g_eval_suspended; }

Region eval_check(CheckKind kind, const Region& primary, const Region* other, Coord d,
                  StepMeter* meter) {
    StepMeter local(EvalLimits{}.step_cap);
    StepMeter& m = meter ? *meter : local;
    switch (kind) {
        case CheckKind::Width: {
            // Opening radius d/2 - 1 discriminates exactly on the 1 nm value
            // grid: even widths >= d keep a core that regrows to cover them,
            // widths <= d - 2 erode away entirely. Radius d/2 would flag a
            // part of width exactly d, which must PASS.
            const Coord h = static_cast<Coord>((d - 1) / 2);
            if (h <= 0) return Region();
            m.charge(1 + 3 * primary.band_count());
            const Region core = size_region(primary, static_cast<Coord>(-h));
            m.charge(1 + core.band_count());
            const Region opened = size_region(core, h);
            m.charge(1 + primary.band_count() + opened.band_count());
            return bool_op(BoolOp::Sub, primary, opened);
        }
        case CheckKind::Spacing:
            return pairwise_markers(primary, primary, d, m, /*cross=*/false);
        case CheckKind::Separation:
            return pairwise_markers(primary, *other, d, m, /*cross=*/true);
        case CheckKind::Enclosed: {
            m.charge(1 + primary.band_count() + other->band_count());
            const Region inside = bool_op(BoolOp::And, primary, *other);
            m.charge(1 + 3 * other->band_count());
            const Region core = size_region(*other, static_cast<Coord>(-d));
            m.charge(1 + inside.band_count() + core.band_count());
            return bool_op(BoolOp::Sub, inside, core);
        }
    }
    return Region();
}

Region eval_expr(const Expr& e, const Layout& layout, const std::map<std::string, Region>& env,
                 StepMeter& meter) {
    switch (e.kind) {
        case Expr::Kind::Layer: {
            meter.charge(1);
            const auto it = env.find(e.layer);
            return it != env.end() ? it->second : layout.layer(e.layer);
        }
        case Expr::Kind::Binary: {
            const Region a = eval_expr(*e.lhs, layout, env, meter);
            const Region b = eval_expr(*e.rhs, layout, env, meter);
            meter.charge(1 + a.band_count() + b.band_count());
            return bool_op(e.op, a, b);
        }
        case Expr::Kind::Sized: {
            const Region base = eval_expr(*e.base, layout, env, meter);
            meter.charge(1 + base.band_count());
            return size_region(base, e.delta);
        }
        case Expr::Kind::Check: {
            const Region primary = eval_expr(*e.base, layout, env, meter);
            Region other;
            if (e.other) other = eval_expr(*e.other, layout, env, meter);
            return eval_check(e.check, primary, e.other ? &other : nullptr, e.dist, &meter);
        }
    }
    return Region();
}

RunResult run_script(const CheckedScript& script, const Layout& layout, const EvalLimits& limits) {
    EvalMeter::bump();
    StepMeter meter(limits.step_cap);
    RunResult rr;
    std::map<std::string, Region> env;
    try {
        for (const Stmt& st : script.ast.statements) {
            switch (st.kind) {
                case Stmt::Kind::LayerDecl:
                    meter.charge(1);
                    env[st.name] = layout.layer(st.source);
                    break;
                case Stmt::Kind::Assign:
                    env[st.name] = eval_expr(*st.expr, layout, env, meter);
                    break;
                case Stmt::Kind::Output: {
                    const Region markers = eval_expr(*st.expr, layout, env, meter);
                    rr.outputs.push_back(OutputResult{st.rule_name, st.description, markers.rects()});
                    break;
                }
            }
        }
    } catch (const EngineLimitError& e) {
        return error_result(ErrorKind::Runtime, e.what(), meter.used());
    } catch (const GeometryError& e) {
        return error_result(ErrorKind::Runtime, e.what(), meter.used());
    }
    rr.stats.eval_steps = meter.used();
    const bool violated = std::any_of(rr.outputs.begin(), rr.outputs.end(),
                                      [](const OutputResult& o) { return !o.markers.empty(); });
    rr.outcome = violated ? Outcome::violation() : Outcome::pass();
    return rr;
}

RunResult run_script_text(std::string_view text, const Layout& layout, const EvalLimits& limits) {
    CheckedScript script;
    try {
        script = compile(text);
    } catch (const ParseError& e) {
        EvalMeter::bump();
        return error_result(ErrorKind::Parse, e.what(), 0);
    } catch (const SemanticError& e) {
        EvalMeter::bump();
        return error_result(ErrorKind::Semantic, e.what(), 0);
    }
    return run_script(script, layout, limits);
}

Outcome phi(const Layout& layout, std::string_view script_text, const EvalLimits& limits) {
    return run_script_text(script_text, layout, limits).outcome;
}

std::vector<Outcome> phi_matrix(const std::vector<std::string>& scripts,
                                const std::vector<Layout>& layouts, int workers,
                                const EvalLimits& limits) {
    struct Pre {
        CheckedScript script;
        ErrorKind fail = ErrorKind::None;
    };
    std::vector<Pre> pre(scripts.size());
    for (size_t i = 0; i < scripts.size(); ++i) {
        try {
            pre[i].script = compile(scripts[i]);
        } catch (const ParseError&) {
            pre[i].fail = ErrorKind::Parse;
        } catch (const SemanticError&) {
            pre[i].fail = ErrorKind::Semantic;
        }
    }
    const int64_t total = static_cast<int64_t>(scripts.size() * layouts.size());
    std::vector<Outcome> out(static_cast<size_t>(total));
    const int nthreads = std::max(1, workers);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
#endif
    for (int64_t k = 0; k < total; ++k) {
        const size_t i = static_cast<size_t>(k) / layouts.size();
        const size_t j = static_cast<size_t>(k) % layouts.size();
        if (pre[i].fail != ErrorKind::None) {
            EvalMeter::bump();
            out[k] = Outcome::make_error(pre[i].fail);
        } else {
            out[k] = run_script(pre[i].script, layouts[j], limits).outcome;
        }
    }
    return out;
}

}  // namespace drc
