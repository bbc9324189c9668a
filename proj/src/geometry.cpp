#include "drc/geometry.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>

namespace drc {

namespace {

using u128 = unsigned __int128;

void append_band(std::vector<Band>& bands, Coord y0, Coord y1, std::vector<Interval>&& xs) {
    if (xs.empty() || y0 >= y1) return;
    if (!bands.empty() && bands.back().y1 == y0 && bands.back().xs == xs) {
        bands.back().y1 = y1;  // vertically merge identical neighbor bands
        return;
    }
    bands.push_back(Band{y0, y1, std::move(xs)});
}

// Sort and coalesce overlapping or adjacent intervals in place.
void merge_intervals(std::vector<Interval>& xs) {
    std::sort(xs.begin(), xs.end(),
              [](const Interval& a, const Interval& b) { return a.x0 < b.x0; });
    size_t out = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (out > 0 && xs[out - 1].x1 >= xs[i].x0) {
            xs[out - 1].x1 = std::max(xs[out - 1].x1, xs[i].x1);
        } else {
            xs[out++] = xs[i];
        }
    }
    xs.resize(out);
}

// Combine two canonical interval lists with a boolean op. Event walk over the
// merged endpoint sequence; canonical non-adjacency guarantees at most one
// event per list per x.
void combine_intervals(BoolOp op, const std::vector<Interval>& A, const std::vector<Interval>& B,
                       std::vector<Interval>& out) {
    out.clear();
    size_t i = 0, j = 0;
    bool in_a = false, in_b = false, inside = false;
    Coord start = 0;
    auto pred = [&]() {
        switch (op) {
            case BoolOp::And: return in_a && in_b;
            case BoolOp::Or: return in_a || in_b;
            case BoolOp::Sub: return in_a && !in_b;
            case BoolOp::Xor: return in_a != in_b;
        }
        return false;
    };
    while (i < A.size() || j < B.size()) {
        Coord x = kCoordMax;
        if (i < A.size()) x = std::min(x, in_a ? A[i].x1 : A[i].x0);
        if (j < B.size()) x = std::min(x, in_b ? B[j].x1 : B[j].x0);
        if (i < A.size()) {
            if (in_a) {
                if (A[i].x1 == x) { in_a = false; ++i; }
            } else if (A[i].x0 == x) {
                in_a = true;
            }
        }
        if (j < B.size()) {
            if (in_b) {
                if (B[j].x1 == x) { in_b = false; ++j; }
            } else if (B[j].x0 == x) {
                in_b = true;
            }
        }
        bool now = pred();
        if (now && !inside) {
            inside = true;
            start = x;
        } else if (!now && inside) {
            inside = false;
            if (!out.empty() && out.back().x1 == start) {
                out.back().x1 = x;  // defensive re-join; unreachable for canonical inputs
            } else {
                out.push_back(Interval{start, x});
            }
        }
    }
}

Coord clamp_coord(int64_t v) {
    return static_cast<Coord>(std::clamp<int64_t>(v, kCoordMin, kCoordMax));
}

// Dilation with result clamped to a clip box; used by erosion where geometry
// outside the frame is irrelevant.
Region dilate_clamped(const Region& r, Coord h, const Rect& clip) {
    std::vector<Rect> grown;
    grown.reserve(r.rect_count());
    for (const Band& b : r.bands()) {
        int64_t y0 = std::max<int64_t>(static_cast<int64_t>(b.y0) - h, clip.y0);
        int64_t y1 = std::min<int64_t>(static_cast<int64_t>(b.y1) + h, clip.y1);
        if (y0 >= y1) continue;
        for (const Interval& iv : b.xs) {
            int64_t x0 = std::max<int64_t>(static_cast<int64_t>(iv.x0) - h, clip.x0);
            int64_t x1 = std::min<int64_t>(static_cast<int64_t>(iv.x1) + h, clip.x1);
            if (x0 >= x1) continue;
            grown.emplace_back(static_cast<Coord>(x0), static_cast<Coord>(y0),
                               static_cast<Coord>(x1), static_cast<Coord>(y1));
        }
    }
    return Region::from_rects(grown);
}

struct Dsu {
    std::vector<size_t> parent;
    explicit Dsu(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), size_t{0}); }
    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(size_t a, size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    }
};

}  // namespace

Coord nm_to_units(int64_t nm) {
    if (nm > kCoordMax / kUnitsPerNm || nm < kCoordMin / kUnitsPerNm) {
        throw CoordOverflow("length out of coordinate range: " + std::to_string(nm) + " nm");
    }
    return static_cast<Coord>(nm * kUnitsPerNm);
}

Region Region::from_rects(std::span<const Rect> rects) {
    Region out;
    if (rects.empty()) return out;
    std::vector<Coord> ys;
    ys.reserve(rects.size() * 2);
    for (const Rect& r : rects) {
        ys.push_back(r.y0);
        ys.push_back(r.y1);
    }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<Interval> xs;
    for (size_t t = 0; t + 1 < ys.size(); ++t) {
        const Coord y0 = ys[t], y1 = ys[t + 1];
        xs.clear();
        for (const Rect& r : rects) {
            if (r.y0 <= y0 && r.y1 >= y1) xs.push_back(Interval{r.x0, r.x1});
        }
        if (xs.empty()) continue;
        merge_intervals(xs);
        append_band(out.bands_, y0, y1, std::move(xs));
        xs = {};
    }
    return out;
}

size_t Region::rect_count() const {
    size_t n = 0;
    for (const Band& b : bands_) n += b.xs.size();
    return n;
}

area_t Region::area() const {
    u128 total = 0;
    for (const Band& b : bands_) {
        uint64_t width = 0;
        for (const Interval& iv : b.xs) width += static_cast<uint64_t>(iv.x1) - iv.x0;
        total += static_cast<u128>(static_cast<uint64_t>(b.y1) - b.y0) * width;
    }
    if (total > std::numeric_limits<area_t>::max()) return std::numeric_limits<area_t>::max();
    return static_cast<area_t>(total);
}

std::vector<Rect> Region::rects() const {
    std::vector<Rect> out;
    out.reserve(rect_count());
    for (const Band& b : bands_) {
        for (const Interval& iv : b.xs) out.emplace_back(iv.x0, b.y0, iv.x1, b.y1);
    }
    return out;
}

Rect Region::bbox() const {
    if (empty()) throw EmptyRegionError("bbox of empty region");
    Coord x0 = kCoordMax, x1 = kCoordMin;
    for (const Band& b : bands_) {
        x0 = std::min(x0, b.xs.front().x0);
        x1 = std::max(x1, b.xs.back().x1);
    }
    return Rect(x0, bands_.front().y0, x1, bands_.back().y1);
}

Region bool_op(BoolOp op, const Region& a, const Region& b) {
    if (a.empty()) {
        if (op == BoolOp::Or || op == BoolOp::Xor) return b;
        return Region{};
    }
    if (b.empty()) {
        if (op == BoolOp::And) return Region{};
        return a;
    }
    std::vector<Coord> ys;
    ys.reserve((a.bands_.size() + b.bands_.size()) * 2);
    for (const Band& bd : a.bands_) {
        ys.push_back(bd.y0);
        ys.push_back(bd.y1);
    }
    for (const Band& bd : b.bands_) {
        ys.push_back(bd.y0);
        ys.push_back(bd.y1);
    }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    static const std::vector<Interval> kNone;
    Region out;
    size_t ia = 0, ib = 0;
    std::vector<Interval> combined;
    for (size_t t = 0; t + 1 < ys.size(); ++t) {
        const Coord y0 = ys[t], y1 = ys[t + 1];
        while (ia < a.bands_.size() && a.bands_[ia].y1 <= y0) ++ia;
        while (ib < b.bands_.size() && b.bands_[ib].y1 <= y0) ++ib;
        const auto& xa =
            (ia < a.bands_.size() && a.bands_[ia].y0 <= y0) ? a.bands_[ia].xs : kNone;
        const auto& xb =
            (ib < b.bands_.size() && b.bands_[ib].y0 <= y0) ? b.bands_[ib].xs : kNone;
        combine_intervals(op, xa, xb, combined);
        append_band(out.bands_, y0, y1, std::vector<Interval>(combined));
    }
    return out;
}

Region size_region(const Region& r, Coord delta) {
    if (delta == 0 || r.empty()) return r;
    if (delta == std::numeric_limits<Coord>::min()) throw CoordOverflow("sizing delta out of range");
    if (delta > 0) {
        std::vector<Rect> grown;
        grown.reserve(r.rect_count());
        for (const Band& b : r.bands()) {
            const int64_t y0 = static_cast<int64_t>(b.y0) - delta;
            const int64_t y1 = static_cast<int64_t>(b.y1) + delta;
            for (const Interval& iv : b.xs) {
                const int64_t x0 = static_cast<int64_t>(iv.x0) - delta;
                const int64_t x1 = static_cast<int64_t>(iv.x1) + delta;
                if (x0 < kCoordMin || y0 < kCoordMin || x1 > kCoordMax || y1 > kCoordMax) {
                    throw CoordOverflow("dilation exceeds coordinate range");
                }
                grown.emplace_back(static_cast<Coord>(x0), static_cast<Coord>(y0),
                                   static_cast<Coord>(x1), static_cast<Coord>(y1));
            }
        }
        return Region::from_rects(grown);
    }

    // Erosion by duality: complement within a frame padded |delta| beyond the
    // bounding box (clamped to the coordinate universe), dilate, subtract.
    const Coord h = -delta;
    const Rect bb = r.bbox();
    const Rect frame(clamp_coord(static_cast<int64_t>(bb.x0) - h),
                     clamp_coord(static_cast<int64_t>(bb.y0) - h),
                     clamp_coord(static_cast<int64_t>(bb.x1) + h),
                     clamp_coord(static_cast<int64_t>(bb.y1) + h));
    Region comp = bool_op(BoolOp::Sub, Region::from_rect(frame), r);
    if (comp.empty()) return r;
    Region blocked = dilate_clamped(comp, h, bb);
    return bool_op(BoolOp::Sub, r, blocked);
}

std::vector<Region> components(const Region& r) {
    if (r.empty()) return {};
    const auto& bands = r.bands();
    std::vector<size_t> band_first(bands.size() + 1, 0);
    for (size_t i = 0; i < bands.size(); ++i) band_first[i + 1] = band_first[i] + bands[i].xs.size();
    const size_t n = band_first.back();
    Dsu dsu(n);

    for (size_t bi = 0; bi + 1 < bands.size(); ++bi) {
        const Band& lo = bands[bi];
        const Band& hi = bands[bi + 1];
        if (lo.y1 != hi.y0) continue;  // y gap: nothing can touch
        size_t p = 0, q = 0;
        while (p < lo.xs.size() && q < hi.xs.size()) {
            const Interval& A = lo.xs[p];
            const Interval& B = hi.xs[q];
            if (A.x1 < B.x0) {
                ++p;
            } else if (B.x1 < A.x0) {
                ++q;
            } else {
                // closures overlap or touch (corner contact included)
                dsu.unite(band_first[bi] + p, band_first[bi + 1] + q);
                if (A.x1 < B.x1) {
                    ++p;
                } else if (B.x1 < A.x1) {
                    ++q;
                } else {
                    ++p;  // equal ends: non-adjacency makes advancing both safe
                    ++q;
                }
            }
        }
    }

    // Gather rects per root, preserving band order within each group.
    std::vector<std::vector<Rect>> groups;
    std::vector<size_t> root_to_group(n, SIZE_MAX);
    std::vector<size_t> flat_band(n);
    {
        size_t k = 0;
        for (size_t bi = 0; bi < bands.size(); ++bi) {
            for (size_t xi = 0; xi < bands[bi].xs.size(); ++xi) flat_band[k++] = bi;
        }
    }
    for (size_t k = 0; k < n; ++k) {
        const size_t root = dsu.find(k);
        if (root_to_group[root] == SIZE_MAX) {
            root_to_group[root] = groups.size();
            groups.emplace_back();
        }
        const size_t bi = flat_band[k];
        const Interval& iv = bands[bi].xs[k - band_first[bi]];
        groups[root_to_group[root]].push_back(Rect(iv.x0, bands[bi].y0, iv.x1, bands[bi].y1));
    }

    struct Keyed {
        Coord min_y0, min_x0;
        Region region;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(groups.size());
    for (const auto& g : groups) {
        Coord min_x0 = kCoordMax;
        for (const Rect& rc : g) min_x0 = std::min(min_x0, rc.x0);
        keyed.push_back(Keyed{g.front().y0, min_x0, Region::from_rects(g)});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.min_y0 != b.min_y0) return a.min_y0 < b.min_y0;
        return a.min_x0 < b.min_x0;
    });
    std::vector<Region> out;
    out.reserve(keyed.size());
    for (auto& k : keyed) out.push_back(std::move(k.region));
    return out;
}

dist2_t min_dist_sq(const Region& a, const Region& b) {
    if (a.empty() || b.empty()) throw EmptyRegionError("min_dist_sq requires non-empty regions");
    dist2_t best = std::numeric_limits<dist2_t>::max();
    for (const Band& ab : a.bands()) {
        for (const Band& bb : b.bands()) {
            int64_t dy = 0;
            if (bb.y0 > ab.y1) dy = static_cast<int64_t>(bb.y0) - ab.y1;
            else if (ab.y0 > bb.y1) dy = static_cast<int64_t>(ab.y0) - bb.y1;
            const u128 dy2 = static_cast<u128>(dy) * static_cast<u128>(dy);
            if (dy2 >= best) continue;
            for (const Interval& ai : ab.xs) {
                for (const Interval& bi : bb.xs) {
                    int64_t dx = 0;
                    if (bi.x0 > ai.x1) dx = static_cast<int64_t>(bi.x0) - ai.x1;
                    else if (ai.x0 > bi.x1) dx = static_cast<int64_t>(ai.x0) - bi.x1;
                    const u128 d2 = static_cast<u128>(dx) * static_cast<u128>(dx) + dy2;
                    if (d2 < best) best = static_cast<dist2_t>(
                        d2 > std::numeric_limits<dist2_t>::max()
                            ? std::numeric_limits<dist2_t>::max()
                            : static_cast<uint64_t>(d2));
                    if (best == 0) return 0;
                }
            }
        }
    }
    return best;
}

uint64_t Bitmap::popcount() const {
    uint64_t n = 0;
    for (uint64_t w0 : words) n += static_cast<uint64_t>(std::popcount(w0));
    return n;
}

Bitmap rasterize(const Region& r, const Rect& window, uint64_t cell_cap) {
    const int64_t w = static_cast<int64_t>(window.x1) - window.x0;
    const int64_t h = static_cast<int64_t>(window.y1) - window.y0;
    if (static_cast<uint64_t>(w) * static_cast<uint64_t>(h) > cell_cap) {
        throw WindowTooLarge("rasterization window exceeds cell cap");
    }
    Bitmap bm;
    bm.x0 = window.x0;
    bm.y0 = window.y0;
    bm.w = static_cast<int32_t>(w);
    bm.h = static_cast<int32_t>(h);
    const int32_t wpr = bm.words_per_row();
    bm.words.assign(static_cast<size_t>(wpr) * bm.h, 0);

    for (const Band& b : r.bands()) {
        const Coord y0 = std::max(b.y0, window.y0);
        const Coord y1 = std::min(b.y1, window.y1);
        if (y0 >= y1) continue;
        for (const Interval& iv : b.xs) {
            const int64_t x0 = std::max(iv.x0, window.x0) - static_cast<int64_t>(window.x0);
            const int64_t x1 = std::min(iv.x1, window.x1) - static_cast<int64_t>(window.x0);
            if (x0 >= x1) continue;
            const int32_t w0 = static_cast<int32_t>(x0 >> 6), w1 = static_cast<int32_t>((x1 - 1) >> 6);
            const uint64_t first_mask = ~0ULL << (x0 & 63);
            const uint64_t last_mask = ~0ULL >> (63 - ((x1 - 1) & 63));
            for (Coord y = y0; y < y1; ++y) {
                uint64_t* row = bm.words.data() + static_cast<size_t>(y - window.y0) * wpr;
                if (w0 == w1) {
                    row[w0] |= first_mask & last_mask;
                } else {
                    row[w0] |= first_mask;
                    for (int32_t wi = w0 + 1; wi < w1; ++wi) row[wi] = ~0ULL;
                    row[w1] |= last_mask;
                }
            }
        }
    }
    return bm;
}

void Layout::set_layer(const std::string& layer, Region r) {
    if (r.empty()) {
        layers_.erase(layer);  // empty and absent are the same point set
    } else {
        layers_[layer] = std::move(r);
    }
}

void Layout::add_rect(const std::string& layer, const Rect& r) {
    set_layer(layer, bool_op(BoolOp::Or, this->layer(layer), Region::from_rect(r)));
}

const Region& Layout::layer(const std::string& layer) const {
    static const Region kEmpty;
    auto it = layers_.find(layer);
    return it == layers_.end() ? kEmpty : it->second;
}

}  // namespace drc
