#include "uhr/rle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uhr {

namespace {

uint64_t pixel_total(int height, int width) {
    return static_cast<uint64_t>(height) * static_cast<uint64_t>(width);
}

}  // namespace

RleMask RleMask::from_counts(int height, int width, std::vector<uint64_t> counts) {
    if (height <= 0 || width <= 0) {
        throw MaskError("mask dimensions must be positive");
    }
    // Merge zero-length runs so equal-parity neighbours collapse. A zero is
    // kept only as the leading background count of a mask that starts with
    // foreground.
    std::vector<uint64_t> canon;
    canon.reserve(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) {
        const uint64_t c = counts[i];
        if (c == 0) continue;
        const int run_parity = static_cast<int>(i % 2);
        if (canon.empty()) {
            if (run_parity == 1) canon.push_back(0);
            canon.push_back(c);
        } else if (static_cast<int>((canon.size() - 1) % 2) == run_parity) {
            canon.back() += c;
        } else {
            canon.push_back(c);
        }
    }
    if (canon.empty()) canon.push_back(pixel_total(height, width));

    uint64_t total = 0;
    for (uint64_t c : canon) total += c;
    if (total != pixel_total(height, width)) {
        throw MaskError("run counts do not cover the mask area");
    }
    RleMask out;
    out.height = height;
    out.width = width;
    out.counts = std::move(canon);
    return out;
}

uint64_t RleMask::foreground_count() const {
    uint64_t total = 0;
    for (size_t i = 1; i < counts.size(); i += 2) total += counts[i];
    return total;
}

RleMask rle_encode(const BinaryMask& mask) {
    if (mask.height <= 0 || mask.width <= 0 ||
        mask.data.size() != pixel_total(mask.height, mask.width)) {
        throw MaskError("malformed dense mask");
    }
    std::vector<uint64_t> counts;
    uint8_t current = 0;  // scan starts counting background
    uint64_t run = 0;
    for (int c = 0; c < mask.width; ++c) {
        for (int r = 0; r < mask.height; ++r) {
            const uint8_t v = mask.at(r, c) ? 1 : 0;
            if (v == current) {
                ++run;
            } else {
                counts.push_back(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push_back(run);
    return RleMask::from_counts(mask.height, mask.width, std::move(counts));
}

BinaryMask rle_decode(const RleMask& mask) {
    if (mask.height <= 0 || mask.width <= 0) {
        throw MaskError("mask dimensions must be positive");
    }
    BinaryMask out(mask.height, mask.width);
    uint64_t pos = 0;
    uint8_t value = 0;
    for (uint64_t count : mask.counts) {
        if (value) {
            for (uint64_t k = 0; k < count; ++k) {
                const uint64_t idx = pos + k;
                const int col = static_cast<int>(idx / mask.height);
                const int row = static_cast<int>(idx % mask.height);
                out.at(row, col) = 1;
            }
        }
        pos += count;
        value ^= 1;
    }
    if (pos != pixel_total(mask.height, mask.width)) {
        throw MaskError("run counts do not cover the mask area");
    }
    return out;
}

std::string rle_compress(const RleMask& mask) {
    std::string out;
    for (size_t i = 0; i < mask.counts.size(); ++i) {
        long long x = static_cast<long long>(mask.counts[i]);
        if (i >= 2) x -= static_cast<long long>(mask.counts[i - 2]);
        // Signed little-endian base-32 with a continuation flag in bit 5.
        bool more = true;
        while (more) {
            int chunk = static_cast<int>(x & 0x1f);
            x >>= 5;
            more = (chunk & 0x10) ? (x != -1) : (x != 0);
            if (more) chunk |= 0x20;
            out.push_back(static_cast<char>(48 + chunk));
        }
    }
    return out;
}

RleMask rle_decompress(const std::string& text, int height, int width) {
    std::vector<long long> decoded;
    size_t p = 0;
    while (p < text.size()) {
        long long x = 0;
        int shift = 0;
        bool more = true;
        int chunk = 0;
        while (more) {
            if (p >= text.size()) throw MaskError("truncated run-length text");
            chunk = static_cast<unsigned char>(text[p]) - 48;
            if (chunk < 0 || chunk > 63) throw MaskError("run-length text has a character outside the coding alphabet");
            if (shift >= 60) throw MaskError("run length overflows");
            x |= static_cast<long long>(chunk & 0x1f) << shift;
            more = (chunk & 0x20) != 0;
            ++p;
            shift += 5;
        }
        if (chunk & 0x10) x |= ~0ll << shift;  // sign-extend the last chunk
        if (decoded.size() >= 2) x += decoded[decoded.size() - 2];
        decoded.push_back(x);
    }
    std::vector<uint64_t> counts;
    counts.reserve(decoded.size());
    for (long long v : decoded) {
        if (v < 0) throw MaskError("negative run length");
        counts.push_back(static_cast<uint64_t>(v));
    }
    return RleMask::from_counts(height, width, std::move(counts));
}

double mask_iou(const RleMask& a, const RleMask& b) {
    if (a.height != b.height || a.width != b.width) {
        throw MaskError("mask dimensions differ");
    }
    // Walk both run lists in lockstep over the shared column-major extent.
    uint64_t inter = 0;
    uint64_t uni = 0;
    size_t ia = 0;
    size_t ib = 0;
    uint64_t rem_a = a.counts.empty() ? 0 : a.counts[0];
    uint64_t rem_b = b.counts.empty() ? 0 : b.counts[0];
    bool fg_a = false;
    bool fg_b = false;
    uint64_t left = pixel_total(a.height, a.width);
    while (left > 0) {
        while (rem_a == 0 && ia + 1 < a.counts.size()) {
            ++ia;
            rem_a = a.counts[ia];
            fg_a = !fg_a;
        }
        while (rem_b == 0 && ib + 1 < b.counts.size()) {
            ++ib;
            rem_b = b.counts[ib];
            fg_b = !fg_b;
        }
        const uint64_t step = std::min({rem_a, rem_b, left});
        if (step == 0) throw MaskError("run counts do not cover the mask area");
        if (fg_a && fg_b) inter += step;
        if (fg_a || fg_b) uni += step;
        rem_a -= step;
        rem_b -= step;
        left -= step;
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Point mask_centroid(const RleMask& mask) {
    double sx = 0.0;
    double sy = 0.0;
    uint64_t n = 0;
    uint64_t pos = 0;
    bool fg = false;
    for (uint64_t count : mask.counts) {
        if (fg) {
            for (uint64_t k = 0; k < count; ++k) {
                const uint64_t idx = pos + k;
                const uint64_t col = idx / mask.height;
                const uint64_t row = idx % mask.height;
                sx += static_cast<double>(col) + 0.5;
                sy += static_cast<double>(row) + 0.5;
            }
            n += count;
        }
        pos += count;
        fg = !fg;
    }
    if (n == 0) throw MaskError("mask has no foreground");
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

GeomBox mask_bbox(const RleMask& mask) {
    int64_t min_r = std::numeric_limits<int64_t>::max();
    int64_t max_r = std::numeric_limits<int64_t>::min();
    int64_t min_c = std::numeric_limits<int64_t>::max();
    int64_t max_c = std::numeric_limits<int64_t>::min();
    uint64_t pos = 0;
    bool fg = false;
    for (uint64_t count : mask.counts) {
        if (fg && count > 0) {
            // A run spans consecutive rows of one or more columns.
            for (uint64_t k = 0; k < count; ++k) {
                const uint64_t idx = pos + k;
                const int64_t col = static_cast<int64_t>(idx / mask.height);
                const int64_t row = static_cast<int64_t>(idx % mask.height);
                min_r = std::min(min_r, row);
                max_r = std::max(max_r, row);
                min_c = std::min(min_c, col);
                max_c = std::max(max_c, col);
            }
        }
        pos += count;
        fg = !fg;
    }
    if (min_r > max_r) throw MaskError("mask has no foreground");
    return GeomBox::hbb(static_cast<double>(min_c), static_cast<double>(min_r),
                        static_cast<double>(max_c + 1), static_cast<double>(max_r + 1));
}

double mask_bbox_diagonal(const RleMask& mask) {
    const GeomBox b = mask_bbox(mask);
    return std::hypot(b.coords[2] - b.coords[0], b.coords[3] - b.coords[1]);
}

RleMask box_fill_mask(const GeomBox& box, int height, int width) {
    validate(box);
    if (height <= 0 || width <= 0) throw MaskError("mask dimensions must be positive");
    BinaryMask dense(height, width);
    uint64_t fg = 0;
    if (box.kind == BoxKind::HBB) {
        // Half-open edges: a pixel belongs to the box iff its center does.
        const double x1 = box.coords[0], y1 = box.coords[1];
        const double x2 = box.coords[2], y2 = box.coords[3];
        const int c0 = std::max(0, static_cast<int>(std::floor(x1 - 0.5)));
        const int c1 = std::min(width - 1, static_cast<int>(std::ceil(x2)));
        const int r0 = std::max(0, static_cast<int>(std::floor(y1 - 0.5)));
        const int r1 = std::min(height - 1, static_cast<int>(std::ceil(y2)));
        for (int r = r0; r <= r1; ++r) {
            const double cy = r + 0.5;
            if (cy < y1 || cy >= y2) continue;
            for (int c = c0; c <= c1; ++c) {
                const double cx = c + 0.5;
                if (cx < x1 || cx >= x2) continue;
                dense.at(r, c) = 1;
                ++fg;
            }
        }
    } else {
        const std::vector<Point> poly = to_polygon(box);
        const double orient = polygon_area_signed(poly) >= 0.0 ? 1.0 : -1.0;
        double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
        for (const Point& p : poly) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const int c0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
        const int c1 = std::min(width - 1, static_cast<int>(std::ceil(max_x)));
        const int r0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
        const int r1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const Point p{c + 0.5, r + 0.5};
                bool inside = true;
                for (size_t e = 0; e < poly.size() && inside; ++e) {
                    const Point& a = poly[e];
                    const Point& b = poly[(e + 1) % poly.size()];
                    const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                    inside = orient * cr >= -kGeomEps;
                }
                if (inside) {
                    dense.at(r, c) = 1;
                    ++fg;
                }
            }
        }
    }
    if (fg == 0) throw MaskError("box covers no pixel of the mask grid");
    return rle_encode(dense);
}

}  // namespace uhr
