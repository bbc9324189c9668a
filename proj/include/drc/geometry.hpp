#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drc/errors.hpp"

namespace drc {

// All geometry lives on an integer grid of 0.5 nm units: user-facing whole-nm
// values are doubled on ingestion, so every half-threshold needed by the
// checks is still an exact integer. Rectangles are half-open cell sets
// [x0,x1) x [y0,y1); a coordinate value c bounds the cell column/row c-1|c.
using Coord = int32_t;
using dist2_t = uint64_t;  // squared distance in units^2, saturating
using area_t = uint64_t;   // cell count, saturating

inline constexpr int kUnitsPerNm = 2;
inline constexpr Coord kCoordMax = 2147483647;
inline constexpr Coord kCoordMin = -2147483647;  // symmetric range, |v| <= 2^31-1

// Whole-nm -> internal units (always even). Throws CoordOverflow out of range.
Coord nm_to_units(int64_t nm);

struct Rect {
    Coord x0, y0, x1, y1;
    Rect(Coord x0_, Coord y0_, Coord x1_, Coord y1_) : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
        if (x0 >= x1 || y0 >= y1) throw GeometryError("degenerate rect");
    }
    bool operator==(const Rect&) const = default;
};

struct Interval {
    Coord x0, x1;  // [x0, x1)
    bool operator==(const Interval&) const = default;
};

struct Band {
    Coord y0, y1;               // [y0, y1)
    std::vector<Interval> xs;   // sorted, pairwise disjoint and non-adjacent
    bool operator==(const Band&) const = default;
};

enum class BoolOp { And, Or, Sub, Xor };

// Canonical band decomposition of a rectilinear point set. Two regions denote
// the same point set iff their band vectors are identical, so operator== is
// set equality.
class Region {
  public:
    Region() = default;

    static Region from_rects(std::span<const Rect> rects);
    static Region from_rect(const Rect& r) { return from_rects({&r, 1}); }

    bool empty() const { return bands_.empty(); }
    const std::vector<Band>& bands() const { return bands_; }
    size_t band_count() const { return bands_.size(); }
    size_t rect_count() const;
    area_t area() const;                 // saturating cell count
    std::vector<Rect> rects() const;     // canonical band decomposition
    Rect bbox() const;                   // EmptyRegionError if empty

    bool operator==(const Region&) const = default;

  private:
    std::vector<Band> bands_;
    friend Region bool_op(BoolOp, const Region&, const Region&);
    friend Region size_region(const Region&, Coord);
    friend std::vector<Region> components(const Region&);
    friend class RegionBuilder;
};

Region bool_op(BoolOp op, const Region& a, const Region& b);

// L-infinity Minkowski sizing: delta > 0 dilates by a square of half-width
// delta, delta < 0 erodes (complement/dilate/complement within a frame padded
// delta beyond the bounding box). Throws CoordOverflow if coordinates leave
// the representable range.
Region size_region(const Region& r, Coord delta);

// Maximal 8-connected components (closure contact merges, so corner-touching
// rects are one component), ordered by (min y0, then min x0).
std::vector<Region> components(const Region& r);

// Exact min over rect pairs of dx^2 + dy^2 between closures, in units^2.
// Throws EmptyRegionError if either side is empty.
dist2_t min_dist_sq(const Region& a, const Region& b);

// Dense cell bitmap used by rasterize(); one bit per cell, row-major words.
struct Bitmap {
    Coord x0 = 0, y0 = 0;  // cell-space origin of the window
    int32_t w = 0, h = 0;  // size in cells
    std::vector<uint64_t> words;

    int32_t words_per_row() const { return (w + 63) / 64; }
    bool get(int32_t x, int32_t y) const {
        return (words[static_cast<size_t>(y) * words_per_row() + (x >> 6)] >> (x & 63)) & 1u;
    }
    void set(int32_t x, int32_t y) {
        words[static_cast<size_t>(y) * words_per_row() + (x >> 6)] |= 1ULL << (x & 63);
    }
    uint64_t popcount() const;
    bool operator==(const Bitmap&) const = default;
};

inline constexpr uint64_t kDefaultCellCap = 4'000'000;

// Rasterize r clipped to the window. Throws WindowTooLarge when the window
// holds more than cell_cap cells.
Bitmap rasterize(const Region& r, const Rect& window, uint64_t cell_cap = kDefaultCellCap);

// Named layers of canonical regions; absent layers read as empty.
class Layout {
  public:
    Layout() = default;
    explicit Layout(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }
    void set_layer(const std::string& layer, Region r);
    void add_rect(const std::string& layer, const Rect& r);  // merges into the layer
    const Region& layer(const std::string& layer) const;
    const std::map<std::string, Region>& layers() const { return layers_; }

    bool operator==(const Layout&) const = default;

  private:
    std::string name_;
    std::map<std::string, Region> layers_;
};

}  // namespace drc
