#include "drc/layout_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "drc/errors.hpp"

namespace drc {

namespace {

using nlohmann::json;

int64_t coord_to_nm(const json& v, bool um, const char* field) {
    if (v.is_number_integer()) {
        const int64_t n = v.get<int64_t>();
        if (!um) return n;
        if (n > INT64_MAX / 1000 || n < INT64_MIN / 1000) {
            throw IngestError(std::string(field) + ": um value out of range");
        }
        return n * 1000;
    }
    if (v.is_number_float()) {
        const double x = v.get<double>() * (um ? 1000.0 : 1.0);
        const double r = std::round(x);
        // values must land on the 1 nm grid exactly (tolerance covers decimal
        // fractions that are not binary-representable, e.g. 0.850 um)
        if (std::abs(x - r) > 1e-4 || std::abs(r) > 9e15) {
            throw IngestError(std::string(field) + ": not on the 1 nm grid: " + v.dump());
        }
        return static_cast<int64_t>(r);
    }
    throw IngestError(std::string(field) + ": expected a number, got " + v.dump());
}

Coord nm_field(const json& rect, const char* field, bool um) {
    if (!rect.contains(field)) {
        throw IngestError(std::string("rect missing field \"") + field + "\"");
    }
    try {
        return nm_to_units(coord_to_nm(rect.at(field), um, field));
    } catch (const CoordOverflow&) {
        throw IngestError(std::string(field) + ": coordinate exceeds the grid range");
    }
}

}  // namespace

Layout layout_from_json(const json& j) {
    if (!j.is_object()) throw IngestError("layout JSON must be an object");
    Layout lay;
    if (j.contains("name")) {
        if (!j.at("name").is_string()) throw IngestError("\"name\" must be a string");
        lay.set_name(j.at("name").get<std::string>());
    }
    bool um = false;
    if (j.contains("units")) {
        const json& u = j.at("units");
        if (u == "um") um = true;
        else if (u == "nm") um = false;
        else throw IngestError("\"units\" must be \"nm\" or \"um\", got " + u.dump());
    }
    if (!j.contains("rects")) return lay;
    if (!j.at("rects").is_array()) throw IngestError("\"rects\" must be an array");

    std::map<std::string, std::vector<Rect>> per_layer;
    for (const json& r : j.at("rects")) {
        if (!r.is_object()) throw IngestError("rect entries must be objects");
        if (!r.contains("layer") || !r.at("layer").is_string()) {
            throw IngestError("rect missing string field \"layer\"");
        }
        const Coord x0 = nm_field(r, "x0", um);
        const Coord y0 = nm_field(r, "y0", um);
        const Coord x1 = nm_field(r, "x1", um);
        const Coord y1 = nm_field(r, "y1", um);
        if (x0 >= x1 || y0 >= y1) {
            throw IngestError("degenerate rect (requires x0 < x1 and y0 < y1): " + r.dump());
        }
        per_layer[r.at("layer").get<std::string>()].push_back(Rect(x0, y0, x1, y1));
    }
    for (const auto& [layer, rects] : per_layer) {
        lay.set_layer(layer, Region::from_rects(rects));
    }
    return lay;
}

Layout layout_from_json_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IngestError(std::string("layout JSON malformed: ") + e.what());
    }
    return layout_from_json(j);
}

Layout load_layout(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open layout file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return layout_from_json_text(buf.str());
}

json layout_to_json(const Layout& lay) {
    json rects = json::array();
    for (const auto& [layer, region] : lay.layers()) {
        for (const Rect& r : region.rects()) {
            if ((r.x0 | r.y0 | r.x1 | r.y1) & 1) {
                throw IngestError("layout has sub-nm coordinates; cannot serialize as nm");
            }
            rects.push_back({{"layer", layer},
                             {"x0", r.x0 / kUnitsPerNm},
                             {"y0", r.y0 / kUnitsPerNm},
                             {"x1", r.x1 / kUnitsPerNm},
                             {"y1", r.y1 / kUnitsPerNm}});
        }
    }
    return json{{"name", lay.name()}, {"units", "nm"}, {"rects", std::move(rects)}};
}

std::string layout_to_json_text(const Layout& lay) { return layout_to_json(lay).dump(2) + "\n"; }

void save_layout(const Layout& lay, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot open layout file for writing: " + path);
    out << layout_to_json_text(lay);
    if (!out) throw IngestError("failed writing layout file: " + path);
}

}  // namespace drc
