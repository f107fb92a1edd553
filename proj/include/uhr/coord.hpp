#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/geometry.hpp"

namespace uhr {

/// Coordinate conventions a model may speak: integers on a 1000-sized
/// virtual canvas, fractions of the canvas, or raw pixels.
enum class CoordConvention { kThousandBase, kUnitScale, kAbsPixels };

class CoordError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Accepts "thousand", "unit", "abs".
CoordConvention parse_convention(const std::string& name);
std::string convention_name(CoordConvention c);

/// A coordinate value list together with the convention it is expressed in
/// and the pixel canvas it refers to.
struct CoordFrame {
    CoordConvention convention = CoordConvention::kThousandBase;
    int width = 0;
    int height = 0;
};

/// One axis value to absolute pixels. Thousand-base and unit-scale round to
/// the nearest pixel (ties away from zero); abs is the identity. Results are
/// clamped to [0, extent]. Throws CoordError on negative or non-finite input.
double axis_to_abs(double value, CoordConvention c, int extent);

/// Inverse of axis_to_abs. Thousand-base rounds to the nearest integer unit;
/// unit-scale stays continuous; abs is the identity. Clamped to the
/// convention's range.
double axis_from_abs(double px, CoordConvention c, int extent);

/// Alternating x,y value lists (points, boxes, quads). Length must be even.
std::vector<double> to_abs(const std::vector<double>& values, const CoordFrame& frame);
std::vector<double> from_abs(const std::vector<double>& pixels, const CoordFrame& frame);

/// Nearest pixel index for a continuous coordinate, clamped to [0, extent-1].
int clamp_index(double v, int extent);

/// A square inspection window over the full image. x0,y0 is the clipped
/// top-left; valid_w/valid_h the unpadded content size. Crops are padded
/// right/bottom to side x side.
struct RoiWindow {
    int x0 = 0;
    int y0 = 0;
    int side = 1024;
    int valid_w = 0;
    int valid_h = 0;
    int image_w = 0;
    int image_h = 0;

    RectRegion rect() const {
        return {static_cast<double>(x0), static_cast<double>(y0),
                static_cast<double>(x0 + valid_w), static_cast<double>(y0 + valid_h)};
    }
};

/// Window centered on the anchor, edges clipped independently to the image
/// (clip, never shift). Throws CoordError when the anchor lies outside the
/// image or side is not positive.
RoiWindow make_roi(const Point& anchor, int side, int image_w, int image_h);

/// Maps a window-local value pair to full-image pixels: origin offset plus
/// the local value scaled over the padded side, clamped to the image.
/// Local thousand-base values must lie in [0, 1000].
Point roi_local_to_full(const RoiWindow& roi, const Point& local,
                        CoordConvention c = CoordConvention::kThousandBase);
std::vector<double> roi_local_to_full(const RoiWindow& roi,
                                      const std::vector<double>& local_values,
                                      CoordConvention c = CoordConvention::kThousandBase);

/// IoU of the clipped window rectangles.
double window_iou(const RoiWindow& a, const RoiWindow& b);

/// Greedy in input order: a window is dropped when its rectangle IoU with an
/// already-kept window exceeds the threshold (strictly).
std::vector<RoiWindow> suppress_overlaps(const std::vector<RoiWindow>& windows,
                                         double iou_threshold = 0.5);

}  // namespace uhr
