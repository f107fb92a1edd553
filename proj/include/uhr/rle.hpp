#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/geometry.hpp"

namespace uhr {

class MaskError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense binary mask, row-major.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // height*width entries, 0 or 1

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {}
    uint8_t& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

/// Column-major run-length counts; the first run counts background.
/// Canonical: no interior zero runs, sum(counts) == height*width.
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<uint64_t> counts;

    /// Canonicalizes (merges zero runs) and validates the pixel total.
    static RleMask from_counts(int height, int width, std::vector<uint64_t> counts);

    uint64_t foreground_count() const;
    bool empty_foreground() const { return foreground_count() == 0; }
};

/// Column-major scan (down each column, columns left to right).
RleMask rle_encode(const BinaryMask& mask);

BinaryMask rle_decode(const RleMask& mask);

/// Compressed text form: counts are delta-coded against the value two
/// runs back (from index 2 onward), then each value is emitted as signed
/// 6-bit little-endian chunks: low 5 payload bits per chunk, continuation
/// flag 0x20, character code 48 + chunk.
std::string rle_compress(const RleMask& mask);

RleMask rle_decompress(const std::string& text, int height, int width);

/// |a^b| / |avb|; 0 when both masks are empty. Throws MaskError on a
/// dimension mismatch (scored as zero upstream).
double mask_iou(const RleMask& a, const RleMask& b);

/// Mean of foreground pixel centers; pixel (r,c) has center (c+0.5, r+0.5).
/// Throws MaskError on an empty mask.
Point mask_centroid(const RleMask& mask);

/// Tight foreground bounding box as pixel edges [min_x, min_y, max_x+1,
/// max_y+1]. Throws MaskError on an empty mask.
GeomBox mask_bbox(const RleMask& mask);

/// Diagonal of the tight foreground bounding box, pixel extents inclusive.
double mask_bbox_diagonal(const RleMask& mask);

/// Rasterizes the box interior: a pixel is foreground iff its center lies
/// inside the box (half-open for HBB edges). Throws MaskError when no pixel
/// falls inside the image.
RleMask box_fill_mask(const GeomBox& box, int height, int width);

}  // namespace uhr
