#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "drc/engine.hpp"
#include "drc/rng.hpp"
#include "raster_oracle.hpp"

using namespace drc;

namespace {

// All engine-facing geometry lives on the even (whole-nm) sub-lattice.
Rect nm_rect(Coord x0, Coord y0, Coord x1, Coord y1) {
    return Rect(2 * x0, 2 * y0, 2 * x1, 2 * y1);
}

Rect random_nm_rect(Rng& rng, const Rect& bounds_nm, int32_t max_side_nm) {
    const Rect r = testref::random_rect_in(rng, bounds_nm, max_side_nm);
    return nm_rect(r.x0, r.y0, r.x1, r.y1);
}

Region random_nm_region(Rng& rng, const Rect& bounds_nm, int max_rects, int32_t max_side_nm) {
    std::vector<Rect> rs;
    const int n = static_cast<int>(rng.range(1, max_rects));
    for (int i = 0; i < n; ++i) rs.push_back(random_nm_rect(rng, bounds_nm, max_side_nm));
    return Region::from_rects(rs);
}

bool run_results_identical(const RunResult& a, const RunResult& b) {
    if (!(a.outcome == b.outcome) || a.outcome.error != b.outcome.error) return false;
    if (a.stats.eval_steps != b.stats.eval_steps) return false;
    if (a.outputs.size() != b.outputs.size()) return false;
    for (size_t i = 0; i < a.outputs.size(); ++i) {
        if (a.outputs[i].rule_name != b.outputs[i].rule_name) return false;
        if (a.outputs[i].description != b.outputs[i].description) return false;
        if (a.outputs[i].markers != b.outputs[i].markers) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("width passes at exactly d and fails one nm under") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 850, 2000));
    CHECK(phi(lay, "a.width(850).output(\"W\", \"d\")") == Outcome::pass());
    CHECK(phi(lay, "a.width(851).output(\"W\", \"d\")") == Outcome::violation());

    Layout narrow;
    narrow.add_rect("a", nm_rect(0, 0, 849, 2000));
    const RunResult rr = run_script_text("a.width(850).output(\"W\", \"d\")", narrow);
    CHECK(rr.outcome == Outcome::violation());
    REQUIRE(rr.outputs.size() == 1);
    // the whole strip is narrower than d, so the marker is the whole strip
    CHECK(rr.outputs[0].markers == std::vector<Rect>{nm_rect(0, 0, 849, 2000)});

    // 1 nm threshold can never be violated: geometry widths are >= 1 nm
    CHECK(phi(narrow, "a.width(1).output(\"W\", \"d\")") == Outcome::pass());
}

TEST_CASE("enclosed passes at margin d and yields 4 sliver markers at d-1") {
    Layout ok;
    ok.add_rect("m4", nm_rect(0, 0, 3700, 3700));
    ok.add_rect("pad", nm_rect(850, 850, 2850, 2850));
    const std::string script = "pad.enclosed(m4, 0.850.um).output(\"ENC\", \"d\")";
    CHECK(phi(ok, script) == Outcome::pass());

    Layout bad;
    bad.add_rect("m4", nm_rect(0, 0, 3700, 3700));
    bad.add_rect("pad", nm_rect(849, 849, 2851, 2851));  // margin 849 nm on all sides
    const RunResult rr = run_script_text(script, bad);
    CHECK(rr.outcome == Outcome::violation());
    REQUIRE(rr.outputs.size() == 1);
    CHECK(rr.outputs[0].markers.size() == 4);  // bottom, left, right, top slivers
    const Region m = Region::from_rects(rr.outputs[0].markers);
    const Region want = bool_op(BoolOp::Sub, Region::from_rect(nm_rect(849, 849, 2851, 2851)),
                                Region::from_rect(nm_rect(850, 850, 2850, 2850)));
    CHECK(m == want);
}

TEST_CASE("separation thresholds at 5.0 um match the fail/pass/pass convention") {
    auto layout_with_gap = [](Coord gap_nm) {
        Layout lay;
        lay.add_rect("a", nm_rect(0, 0, 1000, 1000));
        lay.add_rect("b", nm_rect(1000 + gap_nm, 0, 2000 + gap_nm, 1000));
        return lay;
    };
    const std::string s = "a.separation(b, 5.0.um).output(\"SEP\", \"d\")";
    CHECK(phi(layout_with_gap(4999), s) == Outcome::violation());
    CHECK(phi(layout_with_gap(5000), s) == Outcome::pass());
    CHECK(phi(layout_with_gap(5001), s) == Outcome::pass());
    // alias form agrees
    CHECK(phi(layout_with_gap(4999), "a.sep(b, 5.0.um).output(\"SEP\", \"d\")") ==
          Outcome::violation());
}

TEST_CASE("spacing ignores touching geometry and flags sub-threshold gaps") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 100, 100));
    lay.add_rect("a", nm_rect(199, 0, 300, 100));  // 99 nm gap
    CHECK(phi(lay, "a.spacing(100).output(\"S\", \"d\")") == Outcome::violation());
    CHECK(phi(lay, "a.spacing(99).output(\"S\", \"d\")") == Outcome::pass());  // strict <

    Layout touching;
    touching.add_rect("a", nm_rect(0, 0, 100, 100));
    touching.add_rect("a", nm_rect(100, 0, 200, 100));  // edge abutment: one component
    CHECK(phi(touching, "a.spacing(500).output(\"S\", \"d\")") == Outcome::pass());

    Layout corner;
    corner.add_rect("a", nm_rect(0, 0, 100, 100));
    corner.add_rect("a", nm_rect(100, 100, 200, 200));  // corner contact: one component
    CHECK(phi(corner, "a.spacing(500).output(\"S\", \"d\")") == Outcome::pass());

    Layout diagonal;  // 1 nm diagonal gap: distance sqrt(2) nm
    diagonal.add_rect("a", nm_rect(0, 0, 100, 100));
    diagonal.add_rect("a", nm_rect(101, 101, 200, 200));
    CHECK(phi(diagonal, "a.spacing(2).output(\"S\", \"d\")") == Outcome::violation());
    CHECK(phi(diagonal, "a.spacing(1).output(\"S\", \"d\")") == Outcome::pass());
}

TEST_CASE("pairwise markers: gap box, overlap region, touch witness") {
    Layout gap;
    gap.add_rect("a", nm_rect(0, 0, 100, 100));
    gap.add_rect("a", nm_rect(150, 20, 250, 80));
    const RunResult rr = run_script_text("a.spacing(51).output(\"S\", \"d\")", gap);
    CHECK(rr.outcome == Outcome::violation());
    REQUIRE(rr.outputs.size() == 1);
    // x: open range between facing edges; y: shared range
    CHECK(rr.outputs[0].markers == std::vector<Rect>{nm_rect(100, 20, 150, 80)});

    Layout overlap;
    overlap.add_rect("a", nm_rect(0, 0, 200, 200));
    overlap.add_rect("b", nm_rect(100, 100, 300, 300));
    const RunResult ro = run_script_text("a.separation(b, 10).output(\"S\", \"d\")", overlap);
    CHECK(ro.outcome == Outcome::violation());
    CHECK(ro.outputs[0].markers == std::vector<Rect>{nm_rect(100, 100, 200, 200)});

    Layout touch;
    touch.add_rect("a", nm_rect(0, 0, 100, 100));
    touch.add_rect("b", nm_rect(100, 0, 200, 100));
    const RunResult rt = run_script_text("a.separation(b, 10).output(\"S\", \"d\")", touch);
    CHECK(rt.outcome == Outcome::violation());
    REQUIRE(rt.outputs[0].markers.size() == 1);
    const Rect w = rt.outputs[0].markers[0];
    CHECK((w.x1 - w.x0) * (w.y1 - w.y0) == 4);  // 2x2-unit witness cell = 1 nm^2
}

TEST_CASE("checks compose inside expressions") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 100, 100));
    lay.add_rect("a", nm_rect(150, 20, 250, 80));          // gap box is [100,150)x[20,80) nm
    lay.add_rect("cover", nm_rect(120, 40, 130, 60));      // inside the gap box
    lay.add_rect("off", nm_rect(400, 400, 500, 500));      // away from it
    CHECK(phi(lay, "(a.spacing(51) & cover).output(\"C\", \"d\")") == Outcome::violation());
    CHECK(phi(lay, "(a.spacing(51) & off).output(\"C\", \"d\")") == Outcome::pass());
    // check-of-check also evaluates (marker regions are plain regions)
    CHECK(phi(lay, "a.spacing(51).width(200).output(\"C\", \"d\")") == Outcome::violation());
}

TEST_CASE("two-output enclosure script behaves like the reference example") {
    const std::string gt =
        "m4 = input(\"met4\")\n"
        "pad.enclosed(m4, 0.850.um).output(\"ENC\", \"pad enclosure under 850 nm\")\n"
        "(pad - m4).output(\"HANG\", \"pad outside met4\")\n";

    Layout compliant;
    compliant.add_rect("met4", nm_rect(0, 0, 4000, 4000));
    compliant.add_rect("pad", nm_rect(900, 900, 3100, 3100));
    const RunResult good = run_script_text(gt, compliant);
    CHECK(good.outcome == Outcome::pass());
    REQUIRE(good.outputs.size() == 2);
    CHECK(good.outputs[0].markers.empty());
    CHECK(good.outputs[1].markers.empty());

    Layout sticking_out;
    sticking_out.add_rect("met4", nm_rect(0, 0, 4000, 4000));
    sticking_out.add_rect("pad", nm_rect(3000, 900, 4500, 2100));  // pad leaves met4
    CHECK(run_script_text(gt, sticking_out).outcome == Outcome::violation());

    StepMeter m(1'000'000);
    std::map<std::string, Region> env;
    const Region hang = eval_expr(*parse("x = pad - m4\n").statements[0].expr,
                                  Layout(sticking_out), env, m);
    (void)hang;
    CHECK(!bool_op(BoolOp::Sub, sticking_out.layer("pad"), sticking_out.layer("met4")).empty());
}

TEST_CASE("vacuous and empty scripts pass") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 10, 10));
    CHECK(phi(lay, "") == Outcome::pass());
    CHECK(phi(lay, "# comment only\n") == Outcome::pass());
    CHECK(phi(lay, "x = a & a\ny = x.sized(5)\n") == Outcome::pass());  // no outputs
    const Layout empty;
    CHECK(phi(empty, "q.width(5).output(\"W\", \"d\")") == Outcome::pass());  // absent layer = empty
}

TEST_CASE("parse, semantic and runtime failures fold into the outcome") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 1000, 1000));

    const RunResult rp = run_script_text("a.width(\n", lay);
    CHECK(rp.outcome == Outcome::make_error(ErrorKind::Parse));
    CHECK(rp.outputs.empty());
    CHECK(rp.stats.eval_steps == 0);

    const RunResult rs = run_script_text("x = a\nx = a\nx.output(\"r\", \"d\")\n", lay);
    CHECK(rs.outcome == Outcome::make_error(ErrorKind::Semantic));

    // step cap: outputs produced before the blowup are discarded
    const RunResult rc = run_script_text(
        "a.output(\"ok\", \"first output\")\na.width(500).output(\"W\", \"d\")\n", lay,
        EvalLimits{3});
    CHECK(rc.outcome == Outcome::make_error(ErrorKind::Runtime));
    CHECK(rc.outputs.empty());
    CHECK(rc.stats.eval_steps > 3);

    // coordinate overflow during sizing is a runtime error
    Layout far;
    far.add_rect("a", Rect(kCoordMax - 8, kCoordMax - 8, kCoordMax - 2, kCoordMax - 2));
    const RunResult ro = run_script_text("a.sized(1000000000).output(\"r\", \"d\")", far);
    CHECK(ro.outcome == Outcome::make_error(ErrorKind::Runtime));

    // error outcomes compare equal regardless of kind (clustering contract)
    CHECK(Outcome::make_error(ErrorKind::Parse) == Outcome::make_error(ErrorKind::Runtime));
    CHECK(outcome_rank(Outcome::pass()) < outcome_rank(Outcome::violation()));
    CHECK(outcome_rank(Outcome::violation()) < outcome_rank(Outcome::make_error(ErrorKind::Parse)));
    CHECK(to_string(Outcome::make_error(ErrorKind::Parse)) == "ERROR(parse)");
    CHECK(outcome_code(Outcome::violation()) == 'V');
    CHECK(outcome_from_code('P') == Outcome::pass());
}

TEST_CASE("engine agrees with dense-grid references on random layouts") {
    Rng rng(0xE46133u);
    const Rect bounds_nm(0, 0, 200, 200);
    const Rect window = nm_rect(-50, -50, 250, 250);  // margin 100 units > max radius
    int spacing_violations = 0, separation_violations = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const Region a = random_nm_region(rng, bounds_nm, 6, 60);
        const Region b = random_nm_region(rng, bounds_nm, 6, 60);
        const Coord d_nm = static_cast<Coord>(rng.range(1, 40));
        const Coord d = nm_to_units(d_nm);
        const testref::Grid ga = testref::grid_from_region(a, window);
        const testref::Grid gb = testref::grid_from_region(b, window);
        CAPTURE(trial);
        CAPTURE(d_nm);

        // width and enclosed: exact marker-level agreement
        const Region mw = eval_check(CheckKind::Width, a, nullptr, d);
        CHECK(testref::grid_from_region(mw, window) == testref::ref_width_markers(ga, d));

        const Region me = eval_check(CheckKind::Enclosed, a, &b, d);
        CHECK(testref::grid_from_region(me, window) == testref::ref_enclosed_markers(ga, gb, d));

        // spacing and separation: verdict-level agreement
        const bool sv = !eval_check(CheckKind::Spacing, a, nullptr, d).empty();
        CHECK(sv == testref::ref_spacing_violation(ga, d));
        spacing_violations += sv ? 1 : 0;

        const bool pv = !eval_check(CheckKind::Separation, a, &b, d).empty();
        CHECK(pv == testref::ref_separation_violation(ga, gb, d));
        separation_violations += pv ? 1 : 0;
    }
    // the sample must exercise both verdicts
    CHECK(spacing_violations > 10);
    CHECK(spacing_violations < 140);
    CHECK(separation_violations > 10);
}

TEST_CASE("markers grow monotonically with the threshold") {
    Rng rng(0x30107031u);
    const Rect bounds_nm(0, 0, 300, 300);
    for (int trial = 0; trial < 100; ++trial) {
        const Region a = random_nm_region(rng, bounds_nm, 6, 80);
        const Region b = random_nm_region(rng, bounds_nm, 6, 80);
        Coord d1_nm = static_cast<Coord>(rng.range(1, 60));
        Coord d2_nm = static_cast<Coord>(rng.range(1, 60));
        if (d1_nm > d2_nm) std::swap(d1_nm, d2_nm);
        for (const CheckKind kind :
             {CheckKind::Width, CheckKind::Spacing, CheckKind::Separation, CheckKind::Enclosed}) {
            const bool needs_other = kind == CheckKind::Separation || kind == CheckKind::Enclosed;
            const Region m1 = eval_check(kind, a, needs_other ? &b : nullptr, nm_to_units(d1_nm));
            const Region m2 = eval_check(kind, a, needs_other ? &b : nullptr, nm_to_units(d2_nm));
            CAPTURE(trial);
            CAPTURE(static_cast<int>(kind));
            CHECK(bool_op(BoolOp::Sub, m1, m2).empty());
        }
    }
}

TEST_CASE("doubling all coordinates and thresholds preserves outcomes") {
    Rng rng(0x5CA1E2u);
    const Rect bounds_nm(0, 0, 300, 300);
    const char* kinds[] = {"width(%d)", "spacing(%d)", "separation(b, %d)", "enclosed(b, %d)"};
    for (int trial = 0; trial < 120; ++trial) {
        Layout lay1, lay2;
        for (const char* layer : {"a", "b"}) {
            const int n = static_cast<int>(rng.range(1, 5));
            for (int i = 0; i < n; ++i) {
                const Rect r = random_nm_rect(rng, bounds_nm, 80);
                lay1.add_rect(layer, r);
                lay2.add_rect(layer, Rect(2 * r.x0, 2 * r.y0, 2 * r.x1, 2 * r.y1));
            }
        }
        const int d_nm = static_cast<int>(rng.range(1, 60));
        char call1[64], call2[64];
        const char* fmt = kinds[rng.below(4)];
        snprintf(call1, sizeof call1, fmt, d_nm);
        snprintf(call2, sizeof call2, fmt, 2 * d_nm);
        const std::string s1 = std::string("a.") + call1 + ".output(\"R\", \"d\")";
        const std::string s2 = std::string("a.") + call2 + ".output(\"R\", \"d\")";
        CAPTURE(s1);
        CHECK(phi(lay1, s1) == phi(lay2, s2));
    }
}

TEST_CASE("evaluation is deterministic and metered") {
    Layout lay;
    lay.add_rect("a", nm_rect(0, 0, 500, 400));
    lay.add_rect("a", nm_rect(700, 0, 900, 400));
    lay.add_rect("b", nm_rect(0, 600, 900, 800));
    const std::string s =
        "u = a | b\n"
        "v = u.sized(-20)\n"
        "v.spacing(250).output(\"S\", \"d\")\n"
        "a.separation(b, 300).output(\"T\", \"d\")\n";
    const RunResult r1 = run_script_text(s, lay);
    const RunResult r2 = run_script_text(s, lay);
    CHECK(run_results_identical(r1, r2));
    CHECK(r1.stats.eval_steps > 0);
}

TEST_CASE("phi_matrix is worker-count independent and bumps the eval meter") {
    std::vector<std::string> scripts = {
        "a.width(100).output(\"W\", \"d\")",
        "a.width(\n",  // parse error: whole row is ERROR
        "a.spacing(50).output(\"S\", \"d\")",
    };
    std::vector<Layout> layouts;
    Rng rng(0xBA7C4u);
    for (int i = 0; i < 4; ++i) {
        Layout lay;
        const int n = static_cast<int>(rng.range(1, 5));
        for (int j = 0; j < n; ++j) lay.add_rect("a", random_nm_rect(rng, Rect(0, 0, 300, 300), 90));
        layouts.push_back(lay);
    }
    const uint64_t before = EvalMeter::count();
    const std::vector<Outcome> serial = phi_matrix(scripts, layouts, 1);
    CHECK(EvalMeter::count() - before == scripts.size() * layouts.size());
    const std::vector<Outcome> parallel = phi_matrix(scripts, layouts, 4);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i] == parallel[i]);
        CHECK(serial[i].error == parallel[i].error);
    }
    for (size_t j = 0; j < layouts.size(); ++j) {
        CHECK(serial[1 * layouts.size() + j] == Outcome::make_error(ErrorKind::Parse));
    }
}

TEST_CASE("enclosure check equals its sizing-based rewrite on random layouts") {
    Rng rng(0xF16E3u);
    const Rect bounds_nm(0, 0, 400, 400);
    int disagreements = 0, violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Layout lay;
        const int na = static_cast<int>(rng.range(1, 5)), nb = static_cast<int>(rng.range(1, 5));
        for (int i = 0; i < na; ++i) lay.add_rect("a", random_nm_rect(rng, bounds_nm, 150));
        for (int i = 0; i < nb; ++i) lay.add_rect("b", random_nm_rect(rng, bounds_nm, 150));
        const int d = static_cast<int>(rng.range(1, 120));
        const std::string direct =
            "a.enclosed(b, " + std::to_string(d) + ").output(\"R\", \"d\")";
        const std::string rewrite =
            "(a & b - b.sized(-" + std::to_string(d) + ")).output(\"R\", \"d\")";
        const Outcome o1 = phi(lay, direct), o2 = phi(lay, rewrite);
        disagreements += o1 == o2 ? 0 : 1;
        violations += o1 == Outcome::violation() ? 1 : 0;
    }
    CHECK(disagreements == 0);
    CHECK(violations > 20);  // the sample exercises both verdicts
    CHECK(violations < 195);
}
