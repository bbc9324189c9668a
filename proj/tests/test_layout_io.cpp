#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "drc/errors.hpp"
#include "drc/layout_io.hpp"
#include "drc/rng.hpp"
#include "raster_oracle.hpp"

using namespace drc;

TEST_CASE("nm layout JSON ingests with exact integer scaling") {
    const std::string text = R"({
        "name": "cell0",
        "units": "nm",
        "rects": [
            {"layer": "met4", "x0": 0, "y0": 0, "x1": 3700, "y1": 3700},
            {"layer": "pad",  "x0": 850, "y0": 850, "x1": 2850, "y1": 2850},
            {"layer": "pad",  "x0": 850, "y0": 850, "x1": 2850, "y1": 2850}
        ]
    })";
    const Layout lay = layout_from_json_text(text);
    CHECK(lay.name() == "cell0");
    CHECK(lay.layer("met4") == Region::from_rect(Rect(0, 0, 7400, 7400)));
    // duplicate rects merge; absent layers read as empty
    CHECK(lay.layer("pad") == Region::from_rect(Rect(1700, 1700, 5700, 5700)));
    CHECK(lay.layer("nosuch").empty());
}

TEST_CASE("um layout JSON accepts only exact 1 nm multiples") {
    const Layout lay = layout_from_json_text(
        R"({"units": "um", "rects": [
            {"layer": "a", "x0": 0.0, "y0": -0.003, "x1": 0.85, "y1": 2}]})");
    CHECK(lay.layer("a") == Region::from_rect(Rect(0, -6, 1700, 4000)));

    CHECK_THROWS_AS((void)layout_from_json_text(
                        R"({"units": "um", "rects": [
                            {"layer": "a", "x0": 0, "y0": 0, "x1": 0.8505, "y1": 1}]})"),
                    IngestError);  // 850.5 nm is off-grid
    // fractional nm is rejected in nm units too
    CHECK_THROWS_AS((void)layout_from_json_text(
                        R"({"units": "nm", "rects": [
                            {"layer": "a", "x0": 0, "y0": 0, "x1": 10.5, "y1": 20}]})"),
                    IngestError);
}

TEST_CASE("malformed layout JSON raises IngestError, never crashes") {
    const char* cases[] = {
        "not json at all",
        "[1,2,3]",
        R"({"units": "mm", "rects": []})",
        R"({"units": "nm", "rects": 5})",
        R"({"rects": [{"x0": 0, "y0": 0, "x1": 1, "y1": 1}]})",              // missing layer
        R"({"rects": [{"layer": "a", "x0": 0, "y0": 0, "x1": 1}]})",         // missing y1
        R"({"rects": [{"layer": "a", "x0": 5, "y0": 0, "x1": 5, "y1": 1}]})",  // degenerate
        R"({"rects": [{"layer": "a", "x0": 2, "y0": 0, "x1": 1, "y1": 1}]})",  // inverted
        R"({"rects": [{"layer": "a", "x0": 0, "y0": 0, "x1": 2e18, "y1": 1}]})",  // overflow
        R"({"rects": [{"layer": "a", "x0": "0", "y0": 0, "x1": 1, "y1": 1}]})",  // non-number
        R"({"name": 7, "rects": []})",
    };
    for (const char* text : cases) {
        CAPTURE(text);
        CHECK_THROWS_AS((void)layout_from_json_text(text), IngestError);
    }
}

TEST_CASE("serialization is canonical nm and round-trips exactly") {
    Rng rng(0x10AD10u);
    for (int trial = 0; trial < 50; ++trial) {
        Layout lay("rt" + std::to_string(trial));
        for (const char* layer : {"m1", "m2", "via"}) {
            if (rng.below(4) == 0) continue;
            const int n = static_cast<int>(rng.range(1, 6));
            for (int i = 0; i < n; ++i) {
                const Rect r = testref::random_rect_in(rng, Rect(-200, -200, 200, 200), 80);
                lay.add_rect(layer, Rect(2 * r.x0, 2 * r.y0, 2 * r.x1, 2 * r.y1));
            }
        }
        const std::string text = layout_to_json_text(lay);
        const Layout back = layout_from_json_text(text);
        REQUIRE(back == lay);
        // byte-identical re-serialization (canonical order, integral nm)
        CHECK(layout_to_json_text(back) == text);
    }
}

TEST_CASE("equal layouts assembled differently serialize byte-identically") {
    Layout a("x"), b("x");
    a.add_rect("m", Rect(0, 0, 10, 10));
    a.add_rect("m", Rect(10, 0, 20, 10));   // fuses with the first
    b.add_rect("m", Rect(0, 0, 20, 10));
    REQUIRE(a == b);
    CHECK(layout_to_json_text(a) == layout_to_json_text(b));

    Layout odd;
    odd.add_rect("m", Rect(1, 0, 5, 4));  // sub-nm coordinate
    CHECK_THROWS_AS((void)layout_to_json_text(odd), IngestError);
}

TEST_CASE("file save and load round-trip") {
    Layout lay("disk");
    lay.add_rect("met1", Rect(-40, 0, 60, 22));
    const std::string path = "/tmp/drc_layout_io_test.json";
    save_layout(lay, path);
    CHECK(load_layout(path) == lay);
    CHECK_THROWS_AS((void)load_layout("/nonexistent/nowhere.json"), IngestError);
}
