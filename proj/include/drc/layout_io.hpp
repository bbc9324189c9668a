#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "drc/geometry.hpp"

namespace drc {

// Layout JSON (v1):
//   {"name": str, "units": "nm"|"um",
//    "rects": [{"layer": str, "x0": num, "y0": num, "x1": num, "y1": num}, ...]}
// nm coordinates must be integers; um coordinates must be exact multiples of
// 0.001 (the 1 nm value grid). Anything else raises IngestError.
Layout layout_from_json(const nlohmann::json& j);
Layout layout_from_json_text(std::string_view text);
Layout load_layout(const std::string& path);

// Serialization is always in integral nm with layers and rects in canonical
// order, so equal layouts produce byte-identical JSON.
nlohmann::json layout_to_json(const Layout& lay);
std::string layout_to_json_text(const Layout& lay);  // 2-space indent, trailing newline
void save_layout(const Layout& lay, const std::string& path);

}  // namespace drc
