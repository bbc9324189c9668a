#include "drc/benchmark.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "drc/layout_io.hpp"
#include "drc/rng.hpp"

namespace drc {

namespace {

using nlohmann::json;
using Kind = CheckSite::Kind;

Rect nm_rect(int64_t x0, int64_t y0, int64_t x1, int64_t y1) {
    return Rect(nm_to_units(x0), nm_to_units(y0), nm_to_units(x1), nm_to_units(y1));
}

// ---------------------------------------------------------------------------
// Check-site extraction
// ---------------------------------------------------------------------------

struct Binding {
    bool is_layer = false;   // LayerDecl: resolves to the physical layer
    std::string source;      // LayerDecl physical layer name
    ExprPtr expr;            // Assign: bound expression
};

// Follows name bindings until a non-name expression (or a physical layer) is
// reached. Assignment chains terminate because the resolver forbids cycles.
ExprPtr resolve_top(ExprPtr e, const std::map<std::string, Binding>& byname) {
    while (e->kind == Expr::Kind::Layer) {
        const auto it = byname.find(e->layer);
        if (it == byname.end()) break;  // implicit input layer
        if (it->second.is_layer) return Expr::make_layer(it->second.source);
        e = it->second.expr;
    }
    return e;
}

std::optional<std::string> layer_name(ExprPtr e, const std::map<std::string, Binding>& byname) {
    const ExprPtr r = resolve_top(std::move(e), byname);
    if (r->kind == Expr::Kind::Layer) return r->layer;
    return std::nullopt;
}

int64_t units_to_nm(Coord units) { return static_cast<int64_t>(units) / kUnitsPerNm; }

std::optional<CheckSite> match_site(ExprPtr expr, const std::map<std::string, Binding>& byname) {
    const ExprPtr e = resolve_top(std::move(expr), byname);
    if (e->kind == Expr::Kind::Check) {
        const auto primary = layer_name(e->base, byname);
        if (!primary) return std::nullopt;
        CheckSite site;
        site.primary = *primary;
        site.dist_nm = units_to_nm(e->dist);
        switch (e->check) {
            case CheckKind::Width: site.kind = Kind::Width; return site;
            case CheckKind::Spacing: site.kind = Kind::Spacing; return site;
            case CheckKind::Separation:
            case CheckKind::Enclosed: {
                const auto other = layer_name(e->other, byname);
                if (!other) return std::nullopt;
                site.other = *other;
                site.kind = e->check == CheckKind::Separation ? Kind::Separation : Kind::Enclosed;
                return site;
            }
        }
        return std::nullopt;
    }
    if (e->kind == Expr::Kind::Binary && e->op == BoolOp::Sub) {
        const ExprPtr lhs = resolve_top(e->lhs, byname);
        const ExprPtr rhs = resolve_top(e->rhs, byname);
        // (a & b) - b.sized(-d): the enclosure check written with set algebra.
        if (lhs->kind == Expr::Kind::Binary && lhs->op == BoolOp::And &&
            rhs->kind == Expr::Kind::Sized && rhs->delta < 0) {
            const auto outer = layer_name(rhs->base, byname);
            const auto a = layer_name(lhs->lhs, byname);
            const auto b = layer_name(lhs->rhs, byname);
            if (outer && a && b) {
                CheckSite site;
                site.kind = Kind::Enclosed;
                site.other = *outer;
                site.dist_nm = units_to_nm(-rhs->delta);
                if (*outer == *b) {
                    site.primary = *a;
                    return site;
                }
                if (*outer == *a) {
                    site.primary = *b;
                    return site;
                }
            }
            return std::nullopt;
        }
        // inner - outer: non-empty difference means inner leaks outside outer.
        const auto inner = layer_name(lhs, byname);
        const auto outer = layer_name(rhs, byname);
        if (inner && outer) {
            CheckSite site;
            site.kind = Kind::Containment;
            site.primary = *inner;
            site.other = *outer;
            return site;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Corner geometry
// ---------------------------------------------------------------------------

// Per-site placement offset; sites never share coordinates so the compliant
// layout composes without interaction even for same-layer sites.
constexpr int64_t kSiteStride = 100'000;  // nm

int64_t rect_side(const CheckSite& s) { return std::max<int64_t>(2 * s.dist_nm, 100); }

void add_width_scalar(Layout& lay, const CheckSite& s, int64_t off, int64_t w) {
    if (w <= 0) return;  // zero-width strip: no geometry, the check is vacuous
    const int64_t h = std::max({2 * s.dist_nm, w, int64_t{100}});
    lay.add_rect(s.primary, nm_rect(off, 0, off + w, h));
}

void add_pair_gap(Layout& lay, const std::string& la, const std::string& lb, int64_t off,
                  int64_t side, int64_t gap) {
    lay.add_rect(la, nm_rect(off, 0, off + side, side));
    lay.add_rect(lb, nm_rect(off + side + gap, 0, off + 2 * side + gap, side));
}

void add_enclosed_margin(Layout& lay, const CheckSite& s, int64_t off, int64_t margin) {
    const int64_t side = rect_side(s);
    const int64_t outer = side + 2 * margin;
    lay.add_rect(s.other, nm_rect(off, 0, off + outer, outer));
    lay.add_rect(s.primary, nm_rect(off + margin, margin, off + margin + side, margin + side));
}

void add_partial_overlap(Layout& lay, const CheckSite& s, int64_t off) {
    const int64_t side = rect_side(s);
    // outer centered at off; inner shifted left so half sticks out
    lay.add_rect(s.other, nm_rect(off, 0, off + 3 * side, 3 * side));
    lay.add_rect(s.primary, nm_rect(off - side / 2, side, off + side / 2, 2 * side));
}

void add_contained(Layout& lay, const CheckSite& s, int64_t off) {
    const int64_t side = rect_side(s);
    lay.add_rect(s.other, nm_rect(off, 0, off + 3 * side, 3 * side));
    lay.add_rect(s.primary, nm_rect(off + side, side, off + 2 * side, 2 * side));
}

void add_disjoint_far(Layout& lay, const CheckSite& s, int64_t off) {
    const int64_t side = rect_side(s);
    const int64_t gap = 2 * s.dist_nm + 1000;
    add_pair_gap(lay, s.primary, s.other, off, side, gap);
}

[[noreturn]] void bad_corner(const CheckSite& s, const char* what) {
    throw DomainError(std::string("corner_layout: ") + what + " not applicable to a " +
                      check_site_kind_name(s.kind) + " site");
}

void add_corner(Layout& lay, const CheckSite& s, int64_t off, const CornerSpec& spec) {
    switch (spec.kind) {
        case CornerSpec::Kind::Scalar:
            if (spec.value_nm < 0) throw DomainError("corner_layout: negative scalar value");
            switch (s.kind) {
                case Kind::Width: add_width_scalar(lay, s, off, spec.value_nm); return;
                case Kind::Spacing:
                    add_pair_gap(lay, s.primary, s.primary, off, rect_side(s), spec.value_nm);
                    return;
                case Kind::Separation:
                    add_pair_gap(lay, s.primary, s.other, off, rect_side(s), spec.value_nm);
                    return;
                case Kind::Enclosed: add_enclosed_margin(lay, s, off, spec.value_nm); return;
                case Kind::Containment: bad_corner(s, "a scalar corner");
            }
            return;
        case CornerSpec::Kind::PartialOverlap:
            if (s.kind != Kind::Separation && s.kind != Kind::Enclosed &&
                s.kind != Kind::Containment) {
                bad_corner(s, "partial overlap");
            }
            add_partial_overlap(lay, s, off);
            return;
        case CornerSpec::Kind::Contained:
            if (s.kind != Kind::Separation && s.kind != Kind::Containment) {
                bad_corner(s, "containment topology");
            }
            add_contained(lay, s, off);
            return;
        case CornerSpec::Kind::DisjointFar:
            switch (s.kind) {
                case Kind::Width: bad_corner(s, "disjoint topology");
                case Kind::Spacing:
                    add_pair_gap(lay, s.primary, s.primary, off, rect_side(s),
                                 2 * s.dist_nm + 1000);
                    return;
                case Kind::Separation:
                case Kind::Enclosed:
                case Kind::Containment: add_disjoint_far(lay, s, off); return;
            }
            return;
    }
}

void add_compliant(Layout& lay, const CheckSite& s, int64_t off) {
    switch (s.kind) {
        case Kind::Width: add_width_scalar(lay, s, off, 2 * s.dist_nm); return;
        case Kind::Spacing:
            add_pair_gap(lay, s.primary, s.primary, off, rect_side(s), 2 * s.dist_nm);
            return;
        case Kind::Separation:
            add_pair_gap(lay, s.primary, s.other, off, rect_side(s), 2 * s.dist_nm);
            return;
        case Kind::Enclosed: add_enclosed_margin(lay, s, off, 2 * s.dist_nm); return;
        case Kind::Containment: add_contained(lay, s, off); return;
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

const std::vector<std::string> kSingleLayers = {"met1", "met2", "met3", "met4",
                                                "met5", "poly", "diff", "li1"};
const std::vector<std::string> kSepOthers = {"met1", "met2", "met3", "met4", "met5",
                                             "poly", "diff", "li1",  "tap",  "nwell"};
const std::vector<std::string> kInnerLayers = {"via1", "via2", "via3", "licon1", "mcon", "pad"};
const std::vector<std::string> kOuterLayers = {"met1", "met2", "met3", "met4", "met5", "nwell"};

const std::vector<int64_t> kWidths = {140, 150, 170, 200, 250, 300, 350, 420, 500, 560, 850, 900};
const std::vector<int64_t> kSpacings = {140, 160, 210, 270, 300, 380, 420, 480, 640, 800, 1600};
const std::vector<int64_t> kSeparations = {60, 100, 180, 270, 400, 550, 1000, 2000, 5000};
const std::vector<int64_t> kEnclosures = {30, 40, 50, 60, 80, 110, 150, 200, 255, 850};

// length in a rule sentence: whole nm below 1 um, otherwise um with one to
// three decimals ("5.0 um", "1.6 um")
std::string nm_text(int64_t nm) {
    if (nm < 1000) return std::to_string(nm) + " nm";
    std::string frac = std::to_string(nm % 1000);
    frac.insert(0, 3 - frac.size(), '0');
    while (frac.size() > 1 && frac.back() == '0') frac.pop_back();
    return std::to_string(nm / 1000) + "." + frac + " um";
}

// length literal in script text, nm form
std::string nm_literal(int64_t nm) { return std::to_string(nm) + ".nm"; }

// length literal in script text, um form with exactly three decimals
std::string um_literal(int64_t nm) {
    std::string frac = std::to_string(nm % 1000);
    frac.insert(0, 3 - frac.size(), '0');
    return std::to_string(nm / 1000) + "." + frac + ".um";
}

std::string rule_sentence(const CheckSite& s) {
    switch (s.kind) {
        case Kind::Width:
            return "Minimum width of " + s.primary + " is " + nm_text(s.dist_nm) + ".";
        case Kind::Spacing:
            return "Minimum spacing between " + s.primary + " shapes is " + nm_text(s.dist_nm) +
                   ".";
        case Kind::Separation:
            return "Keep " + s.primary + " at least " + nm_text(s.dist_nm) + " away from " +
                   s.other + ".";
        case Kind::Enclosed:
            return s.other + " must enclose " + s.primary + " by at least " + nm_text(s.dist_nm) +
                   ".";
        case Kind::Containment:
            return s.primary + " must lie completely inside " + s.other + ".";
    }
    return "";
}

std::string rule_id(const CheckSite& s) {
    switch (s.kind) {
        case Kind::Width: return s.primary + ".width";
        case Kind::Spacing: return s.primary + ".spacing";
        case Kind::Separation: return s.primary + ".sep." + s.other;
        case Kind::Enclosed: return s.primary + ".enc." + s.other;
        case Kind::Containment: return s.primary + ".in." + s.other;
    }
    return "";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

// Script line enforcing one site in the plain method-call form.
std::string check_line(const CheckSite& s, const std::string& literal) {
    const std::string out =
        ".output(" + quoted(rule_id(s)) + ", " + quoted(rule_sentence(s)) + ")";
    switch (s.kind) {
        case Kind::Width: return s.primary + ".width(" + literal + ")" + out;
        case Kind::Spacing: return s.primary + ".spacing(" + literal + ")" + out;
        case Kind::Separation:
            return s.primary + ".separation(" + s.other + ", " + literal + ")" + out;
        case Kind::Enclosed:
            return s.primary + ".enclosed(" + s.other + ", " + literal + ")" + out;
        case Kind::Containment: return "(" + s.primary + " - " + s.other + ")" + out;
    }
    return "";
}

std::string pick_unused(Rng& rng, const std::vector<std::string>& pool,
                        std::vector<std::string>& used) {
    for (int tries = 0; tries < 64; ++tries) {
        const std::string& c = rng.pick(pool);
        if (std::find(used.begin(), used.end(), c) == used.end()) {
            used.push_back(c);
            return c;
        }
    }
    throw GenerationFailed("layer pool exhausted");
}

CheckSite sample_site(Rng& rng, std::vector<std::string>& used_layers) {
    CheckSite s;
    switch (rng.below(4)) {
        case 0:
            s.kind = Kind::Width;
            s.primary = pick_unused(rng, kSingleLayers, used_layers);
            s.dist_nm = rng.pick(kWidths);
            break;
        case 1:
            s.kind = Kind::Spacing;
            s.primary = pick_unused(rng, kSingleLayers, used_layers);
            s.dist_nm = rng.pick(kSpacings);
            break;
        case 2:
            s.kind = Kind::Separation;
            s.primary = pick_unused(rng, kSingleLayers, used_layers);
            s.other = pick_unused(rng, kSepOthers, used_layers);
            s.dist_nm = rng.pick(kSeparations);
            break;
        default:
            s.kind = Kind::Enclosed;
            s.primary = pick_unused(rng, kInnerLayers, used_layers);
            s.other = pick_unused(rng, kOuterLayers, used_layers);
            s.dist_nm = rng.pick(kEnclosures);
            break;
    }
    return s;
}

std::string input_decls(const std::vector<CheckSite>& sites) {
    std::vector<std::string> seen;
    std::string out;
    const auto declare = [&](const std::string& layer) {
        if (layer.empty()) return;
        if (std::find(seen.begin(), seen.end(), layer) != seen.end()) return;
        seen.push_back(layer);
        out += layer + " = input(" + quoted(layer) + ")\n";
    };
    for (const CheckSite& s : sites) {
        declare(s.primary);
        declare(s.other);
    }
    return out;
}

struct Draft {
    std::string rule;
    std::string script;
    std::vector<CheckSite> sites;
};

Draft draft_pdk(Rng& rng) {
    Draft d;
    std::vector<std::string> used;
    d.sites.push_back(sample_site(rng, used));
    d.rule = rule_sentence(d.sites[0]);
    d.script = input_decls(d.sites) + check_line(d.sites[0], nm_literal(d.sites[0].dist_nm)) + "\n";
    return d;
}

Draft draft_multi(Rng& rng) {
    Draft d;
    std::vector<std::string> used;
    const int n = 2 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) d.sites.push_back(sample_site(rng, used));
    d.script = input_decls(d.sites);
    for (const CheckSite& s : d.sites) {
        if (!d.rule.empty()) d.rule += " ";
        d.rule += rule_sentence(s);
        d.script += check_line(s, nm_literal(s.dist_nm)) + "\n";
    }
    return d;
}

Draft draft_syntax(Rng& rng) {
    Draft d;
    std::vector<std::string> used;
    CheckSite s;
    switch (rng.below(5)) {
        case 0: {  // sep alias
            s.kind = Kind::Separation;
            s.primary = pick_unused(rng, kSingleLayers, used);
            s.other = pick_unused(rng, kSepOthers, used);
            s.dist_nm = rng.pick(kSeparations);
            d.script = input_decls({s}) + s.primary + ".sep(" + s.other + ", " +
                       nm_literal(s.dist_nm) + ").output(" + quoted(rule_id(s)) + ", " +
                       quoted(rule_sentence(s)) + ")\n";
            break;
        }
        case 1: {  // enclosure via set algebra
            s.kind = Kind::Enclosed;
            s.primary = pick_unused(rng, kInnerLayers, used);
            s.other = pick_unused(rng, kOuterLayers, used);
            s.dist_nm = rng.pick(kEnclosures);
            d.script = input_decls({s}) + "enc_bad = (" + s.primary + " & " + s.other + ") - " +
                       s.other + ".sized(-" + nm_literal(s.dist_nm) + ")\n" + "enc_bad.output(" +
                       quoted(rule_id(s)) + ", " + quoted(rule_sentence(s)) + ")\n";
            break;
        }
        case 2: {  // containment by subtraction
            s.kind = Kind::Containment;
            s.primary = pick_unused(rng, kInnerLayers, used);
            s.other = pick_unused(rng, kOuterLayers, used);
            d.script = input_decls({s}) + check_line(s, "") + "\n";
            break;
        }
        case 3: {  // um length literal
            s.kind = Kind::Width;
            s.primary = pick_unused(rng, kSingleLayers, used);
            s.dist_nm = rng.pick(kWidths);
            d.script = input_decls({s}) + s.primary + ".width(" + um_literal(s.dist_nm) +
                       ").output(" + quoted(rule_id(s)) + ", " + quoted(rule_sentence(s)) + ")\n";
            break;
        }
        default: {  // named intermediate result
            s.kind = Kind::Width;
            s.primary = pick_unused(rng, kSingleLayers, used);
            s.dist_nm = rng.pick(kWidths);
            d.script = input_decls({s}) + "bad = " + s.primary + ".width(" +
                       nm_literal(s.dist_nm) + ")\n" + "bad.output(" + quoted(rule_id(s)) + ", " +
                       quoted(rule_sentence(s)) + ")\n";
            break;
        }
    }
    d.rule = rule_sentence(s);
    d.sites.push_back(s);
    return d;
}

struct CornerPlan {
    CornerSpec spec;
    Verdict expect;
    std::string tag;
};

std::vector<CornerPlan> corner_plan(const CheckSite& s) {
    std::vector<CornerPlan> plan;
    const auto scalar = [&](int64_t v, Verdict expect) {
        plan.push_back({CornerSpec::scalar(v), expect, "at" + std::to_string(v)});
    };
    switch (s.kind) {
        case Kind::Width:
        case Kind::Spacing:
            scalar(s.dist_nm - 1, Verdict::Violation);
            scalar(s.dist_nm, Verdict::Pass);
            scalar(s.dist_nm + 1, Verdict::Pass);
            break;
        case Kind::Separation:
            scalar(s.dist_nm - 1, Verdict::Violation);
            scalar(s.dist_nm, Verdict::Pass);
            scalar(s.dist_nm + 1, Verdict::Pass);
            plan.push_back({CornerSpec::partial_overlap(), Verdict::Violation, "overlap"});
            plan.push_back({CornerSpec::contained(), Verdict::Violation, "inside"});
            plan.push_back({CornerSpec::disjoint_far(), Verdict::Pass, "far"});
            break;
        case Kind::Enclosed:
            scalar(s.dist_nm - 1, Verdict::Violation);
            scalar(s.dist_nm, Verdict::Pass);
            scalar(s.dist_nm + 1, Verdict::Pass);
            plan.push_back({CornerSpec::partial_overlap(), Verdict::Violation, "overlap"});
            plan.push_back({CornerSpec::disjoint_far(), Verdict::Pass, "far"});
            break;
        case Kind::Containment:
            plan.push_back({CornerSpec::partial_overlap(), Verdict::Violation, "overlap"});
            plan.push_back({CornerSpec::contained(), Verdict::Pass, "inside"});
            plan.push_back({CornerSpec::disjoint_far(), Verdict::Violation, "far"});
            break;
    }
    return plan;
}

const std::vector<std::string>& all_categories() {
    static const std::vector<std::string> cats = {kCategoryPdk, kCategoryMulti, kCategorySyntax};
    return cats;
}

double category_weight(const std::string& c) {
    if (c == kCategoryPdk) return 0.31;
    if (c == kCategoryMulti) return 0.49;
    return 0.20;
}

}  // namespace

const char* check_site_kind_name(CheckSite::Kind k) {
    switch (k) {
        case Kind::Width: return "width";
        case Kind::Spacing: return "spacing";
        case Kind::Separation: return "separation";
        case Kind::Enclosed: return "enclosed";
        case Kind::Containment: return "containment";
    }
    return "?";
}

std::vector<CheckSite> extract_check_sites(const CheckedScript& script) {
    std::map<std::string, Binding> byname;
    std::vector<CheckSite> sites;
    for (const Stmt& st : script.ast.statements) {
        switch (st.kind) {
            case Stmt::Kind::LayerDecl: byname[st.name] = Binding{true, st.source, nullptr}; break;
            case Stmt::Kind::Assign: byname[st.name] = Binding{false, "", st.expr}; break;
            case Stmt::Kind::Output:
                if (auto site = match_site(st.expr, byname)) sites.push_back(*site);
                break;
        }
    }
    return sites;
}

std::vector<CheckSite> extract_check_sites_text(const std::string& script_text) {
    return extract_check_sites(compile(script_text));
}

Layout corner_layout(const std::vector<CheckSite>& sites, size_t target, const CornerSpec& spec,
                     const std::string& name) {
    if (target >= sites.size()) throw DomainError("corner_layout: target site out of range");
    Layout lay(name);
    add_corner(lay, sites[target], static_cast<int64_t>(target) * kSiteStride, spec);
    return lay;
}

Layout compliant_layout(const std::vector<CheckSite>& sites, const std::string& name) {
    Layout lay(name);
    for (size_t i = 0; i < sites.size(); ++i) {
        add_compliant(lay, sites[i], static_cast<int64_t>(i) * kSiteStride);
    }
    return lay;
}

std::vector<Task> gen_synthetic_tasks(const TaskGenSpec& spec) {
    if (spec.count < 1) throw DomainError("gen_synthetic_tasks: count must be >= 1");
    std::vector<std::string> cats = spec.categories.empty() ? all_categories() : spec.categories;
    double total = 0;
    for (const std::string& c : cats) {
        if (std::find(all_categories().begin(), all_categories().end(), c) ==
            all_categories().end()) {
            throw DomainError("gen_synthetic_tasks: unknown category " + c);
        }
        total += category_weight(c);
    }

    std::vector<Task> tasks;
    tasks.reserve(static_cast<size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        // deterministic category assignment matching the weight mix
        const double u = (i + 0.5) / spec.count * total;
        std::string category = cats.back();
        double acc = 0;
        for (const std::string& c : cats) {
            acc += category_weight(c);
            if (u < acc) {
                category = c;
                break;
            }
        }

        Task task;
        task.id = "t" + std::to_string(spec.seed) + "-";
        {
            std::string idx = std::to_string(i);
            idx.insert(0, idx.size() < 5 ? 5 - idx.size() : 0, '0');
            task.id += idx;
        }
        task.category = category;

        bool built = false;
        std::string last_problem = "no attempt";
        for (int attempt = 0; attempt < 20 && !built; ++attempt) {
            Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(i), static_cast<uint64_t>(attempt)));
            Draft d;
            if (category == kCategoryPdk) d = draft_pdk(rng);
            else if (category == kCategoryMulti) d = draft_multi(rng);
            else d = draft_syntax(rng);

            // The stored script must round-trip through site extraction: the
            // corner machinery (and the test-generation heuristics built on
            // it) rely on recovering exactly the sites we sampled.
            CheckedScript checked;
            try {
                checked = compile(d.script);
            } catch (const Error& e) {
                last_problem = std::string("draft script does not compile: ") + e.what();
                continue;
            }
            if (extract_check_sites(checked) != d.sites) {
                last_problem = "site extraction does not reproduce the draft";
                continue;
            }

            task.rule = d.rule;
            task.gt_script = d.script;
            task.layouts.clear();

            bool ok = true;
            const auto add_labeled = [&](Layout lay, Verdict expect, const std::string& why) {
                const RunResult rr = run_script(checked, lay);
                if (rr.outcome.verdict != expect) {
                    last_problem = "corner '" + why + "' produced " + to_string(rr.outcome) +
                                   ", wanted " + to_string(Outcome{expect, ErrorKind::None});
                    ok = false;
                    return;
                }
                task.layouts.push_back(LabeledLayout{expect, std::move(lay)});
            };
            for (size_t k = 0; k < d.sites.size() && ok; ++k) {
                for (const CornerPlan& cp : corner_plan(d.sites[k])) {
                    const std::string label = "s" + std::to_string(k) + "." + cp.tag;
                    add_labeled(corner_layout(d.sites, k, cp.spec, task.id + "." + label),
                                cp.expect, label);
                    if (!ok) break;
                }
            }
            if (ok) {
                add_labeled(compliant_layout(d.sites, task.id + ".clean"), Verdict::Pass, "clean");
            }
            if (!ok) continue;

            bool has_pass = false, has_viol = false;
            for (const LabeledLayout& l : task.layouts) {
                (l.label == Verdict::Pass ? has_pass : has_viol) = true;
            }
            if (!has_pass || !has_viol) {
                last_problem = "task lacks a PASS or a VIOLATION layout";
                continue;
            }
            built = true;
        }
        if (!built) {
            throw GenerationFailed("task " + task.id + ": " + last_problem);
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// Task JSON
// ---------------------------------------------------------------------------

json task_to_json(const Task& t) {
    json layouts = json::array();
    for (const LabeledLayout& l : t.layouts) {
        json lj = layout_to_json(l.layout);
        lj["label"] = l.label == Verdict::Violation ? "VIOLATION" : "PASS";
        layouts.push_back(std::move(lj));
    }
    return json{{"id", t.id},
                {"rule", t.rule},
                {"gt_script", t.gt_script},
                {"category", t.category},
                {"layouts", std::move(layouts)}};
}

Task task_from_json(const json& j) {
    if (!j.is_object()) throw IngestError("task JSON must be an object");
    Task t;
    for (const char* field : {"id", "rule", "gt_script", "category"}) {
        if (!j.contains(field) || !j.at(field).is_string()) {
            throw IngestError(std::string("task JSON needs string field \"") + field + "\"");
        }
    }
    t.id = j.at("id").get<std::string>();
    t.rule = j.at("rule").get<std::string>();
    t.gt_script = j.at("gt_script").get<std::string>();
    t.category = j.at("category").get<std::string>();
    if (!j.contains("layouts") || !j.at("layouts").is_array() || j.at("layouts").empty()) {
        throw IngestError("task JSON needs a non-empty \"layouts\" array");
    }

    CheckedScript checked;
    try {
        checked = compile(t.gt_script);
    } catch (const Error& e) {
        throw IngestError("task " + t.id + ": gt_script does not compile: " + e.what());
    }

    bool has_pass = false, has_viol = false;
    for (const json& lj : j.at("layouts")) {
        if (!lj.is_object() || !lj.contains("label")) {
            throw IngestError("task " + t.id + ": layout entry missing \"label\"");
        }
        const std::string label = lj.at("label").get<std::string>();
        Verdict v;
        if (label == "PASS") v = Verdict::Pass;
        else if (label == "VIOLATION") v = Verdict::Violation;
        else throw IngestError("task " + t.id + ": bad label \"" + label + "\"");

        LabeledLayout l{v, layout_from_json(lj)};
        // labels are cached, never trusted: re-run the reference script
        const RunResult rr = run_script(checked, l.layout);
        if (rr.outcome.verdict != v) {
            throw IngestError("task " + t.id + ": stored label " + label + " but gt_script says " +
                              to_string(rr.outcome) + " on layout \"" + l.layout.name() + "\"");
        }
        (v == Verdict::Pass ? has_pass : has_viol) = true;
        t.layouts.push_back(std::move(l));
    }
    if (!has_pass || !has_viol) {
        throw IngestError("task " + t.id + ": needs at least one PASS and one VIOLATION layout");
    }
    return t;
}

Task load_task(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open task file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw IngestError("task JSON malformed (" + path + "): " + e.what());
    }
    return task_from_json(j);
}

void save_task(const Task& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write task file: " + path);
    out << task_to_json(t).dump(2) << "\n";
}

std::vector<Task> load_tasks_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path().string());
        }
    }
    if (ec) throw IngestError("cannot read task directory: " + dir + ": " + ec.message());
    if (files.empty()) throw IngestError("no task files (*.json) under " + dir);
    std::sort(files.begin(), files.end());
    std::vector<Task> tasks;
    tasks.reserve(files.size());
    for (const std::string& f : files) tasks.push_back(load_task(f));
    std::sort(tasks.begin(), tasks.end(),
              [](const Task& a, const Task& b) { return a.id < b.id; });
    return tasks;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

int success_indicator(const Task& task, const std::string& script) {
    for (const LabeledLayout& l : task.layouts) {
        const Outcome o = phi(l.layout, script);
        if (o.verdict != l.label) return 0;  // ERROR matches neither label
    }
    return 1;
}

int error_indicator(const Task& task, const std::string& script) {
    for (const LabeledLayout& l : task.layouts) {
        if (phi(l.layout, script).verdict == Verdict::Error) return 1;
    }
    return 0;
}

int oracle_at_n_success(const std::vector<int>& per_sample_success) {
    if (per_sample_success.empty()) throw DomainError("oracle_at_n_success: no samples");
    for (int s : per_sample_success) {
        if (s) return 1;
    }
    return 0;
}

int oracle_at_n_error(const std::vector<int>& per_sample_error) {
    if (per_sample_error.empty()) throw DomainError("oracle_at_n_error: no samples");
    for (int e : per_sample_error) {
        if (!e) return 0;
    }
    return 1;
}

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n || k < 1 || k > n) {
        throw DomainError("pass_at_k: need 0 <= c <= n and 1 <= k <= n");
    }
    double miss = 1.0;
    for (int i = 0; i < k; ++i) {
        const int num = n - c - i;
        if (num <= 0) return 1.0;
        miss *= static_cast<double>(num) / static_cast<double>(n - i);
    }
    return 1.0 - miss;
}

double f1_per_task(const Task& task, const std::string& script) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (const LabeledLayout& l : task.layouts) {
        const Outcome o = phi(l.layout, script);
        if (o.verdict == Verdict::Error) return 0.0;
        const bool pred = o.verdict == Verdict::Violation;
        const bool truth = l.label == Verdict::Violation;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
    }
    const int64_t denom = 2 * tp + fp + fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double label_error_rate(const std::string& gt_script,
                        const std::vector<std::pair<Layout, Verdict>>& tests) {
    if (tests.empty()) throw DomainError("label_error_rate: no tests");
    int64_t wrong = 0;
    for (const auto& [layout, expected] : tests) {
        wrong += phi(layout, gt_script).verdict != expected;
    }
    return static_cast<double>(wrong) / static_cast<double>(tests.size());
}

}  // namespace drc
