#include "uhr/coord.hpp"

#include <algorithm>
#include <cmath>

namespace uhr {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void require_canvas(int width, int height) {
    if (width < 1 || height < 1) throw CoordError("canvas dimensions must be at least 1");
}

}  // namespace

CoordConvention parse_convention(const std::string& name) {
    if (name == "thousand") return CoordConvention::kThousandBase;
    if (name == "unit") return CoordConvention::kUnitScale;
    if (name == "abs") return CoordConvention::kAbsPixels;
    throw CoordError("unknown coordinate convention: " + name);
}

std::string convention_name(CoordConvention c) {
    switch (c) {
        case CoordConvention::kThousandBase: return "thousand";
        case CoordConvention::kUnitScale: return "unit";
        case CoordConvention::kAbsPixels: return "abs";
    }
    throw CoordError("unknown coordinate convention");
}

double axis_to_abs(double value, CoordConvention c, int extent) {
    if (extent < 1) throw CoordError("axis extent must be at least 1");
    if (!std::isfinite(value) || value < 0.0) {
        throw CoordError("coordinate must be finite and non-negative");
    }
    double px = value;
    switch (c) {
        case CoordConvention::kThousandBase:
            px = std::round(value / 1000.0 * extent);
            break;
        case CoordConvention::kUnitScale:
            px = std::round(value * extent);
            break;
        case CoordConvention::kAbsPixels:
            break;
    }
    return clamp(px, 0.0, static_cast<double>(extent));
}

double axis_from_abs(double px, CoordConvention c, int extent) {
    if (extent < 1) throw CoordError("axis extent must be at least 1");
    if (!std::isfinite(px) || px < 0.0) {
        throw CoordError("pixel coordinate must be finite and non-negative");
    }
    switch (c) {
        case CoordConvention::kThousandBase:
            return clamp(std::round(px / extent * 1000.0), 0.0, 1000.0);
        case CoordConvention::kUnitScale:
            return clamp(px / extent, 0.0, 1.0);
        case CoordConvention::kAbsPixels:
            return clamp(px, 0.0, static_cast<double>(extent));
    }
    throw CoordError("unknown coordinate convention");
}

std::vector<double> to_abs(const std::vector<double>& values, const CoordFrame& frame) {
    require_canvas(frame.width, frame.height);
    if (values.size() % 2 != 0) throw CoordError("coordinate list must alternate x,y");
    std::vector<double> out;
    out.reserve(values.size());
    for (size_t i = 0; i < values.size(); i += 2) {
        out.push_back(axis_to_abs(values[i], frame.convention, frame.width));
        out.push_back(axis_to_abs(values[i + 1], frame.convention, frame.height));
    }
    return out;
}

std::vector<double> from_abs(const std::vector<double>& pixels, const CoordFrame& frame) {
    require_canvas(frame.width, frame.height);
    if (pixels.size() % 2 != 0) throw CoordError("coordinate list must alternate x,y");
    std::vector<double> out;
    out.reserve(pixels.size());
    for (size_t i = 0; i < pixels.size(); i += 2) {
        out.push_back(axis_from_abs(pixels[i], frame.convention, frame.width));
        out.push_back(axis_from_abs(pixels[i + 1], frame.convention, frame.height));
    }
    return out;
}

int clamp_index(double v, int extent) {
    const long long idx = std::llround(v);
    return static_cast<int>(std::min<long long>(std::max<long long>(idx, 0), extent - 1));
}

RoiWindow make_roi(const Point& anchor, int side, int image_w, int image_h) {
    require_canvas(image_w, image_h);
    if (side < 1) throw CoordError("window side must be at least 1");
    if (anchor.x < 0.0 || anchor.y < 0.0 || anchor.x > image_w || anchor.y > image_h) {
        throw CoordError("window anchor lies outside the image");
    }
    const long long x_lo = std::llround(anchor.x - side / 2.0);
    const long long y_lo = std::llround(anchor.y - side / 2.0);
    RoiWindow roi;
    roi.side = side;
    roi.image_w = image_w;
    roi.image_h = image_h;
    roi.x0 = static_cast<int>(std::max<long long>(x_lo, 0));
    roi.y0 = static_cast<int>(std::max<long long>(y_lo, 0));
    const long long x_hi = std::min<long long>(x_lo + side, image_w);
    const long long y_hi = std::min<long long>(y_lo + side, image_h);
    roi.valid_w = static_cast<int>(x_hi - roi.x0);
    roi.valid_h = static_cast<int>(y_hi - roi.y0);
    return roi;
}

Point roi_local_to_full(const RoiWindow& roi, const Point& local, CoordConvention c) {
    if (c == CoordConvention::kThousandBase &&
        (local.x < 0.0 || local.x > 1000.0 || local.y < 0.0 || local.y > 1000.0)) {
        throw CoordError("window-local coordinate outside [0,1000]");
    }
    const double fx = roi.x0 + axis_to_abs(local.x, c, roi.side);
    const double fy = roi.y0 + axis_to_abs(local.y, c, roi.side);
    return {clamp(fx, 0.0, static_cast<double>(roi.image_w)),
            clamp(fy, 0.0, static_cast<double>(roi.image_h))};
}

std::vector<double> roi_local_to_full(const RoiWindow& roi,
                                      const std::vector<double>& local_values,
                                      CoordConvention c) {
    if (local_values.size() % 2 != 0) throw CoordError("coordinate list must alternate x,y");
    std::vector<double> out;
    out.reserve(local_values.size());
    for (size_t i = 0; i < local_values.size(); i += 2) {
        const Point local{local_values[i], local_values[i + 1]};
        const Point p = roi_local_to_full(roi, local, c);
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

double window_iou(const RoiWindow& a, const RoiWindow& b) {
    const RectRegion ra = a.rect();
    const RectRegion rb = b.rect();
    const double ix = std::max(0.0, std::min(ra.x2, rb.x2) - std::max(ra.x1, rb.x1));
    const double iy = std::max(0.0, std::min(ra.y2, rb.y2) - std::max(ra.y1, rb.y1));
    const double inter = ix * iy;
    const double uni = ra.area() + rb.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

std::vector<RoiWindow> suppress_overlaps(const std::vector<RoiWindow>& windows,
                                         double iou_threshold) {
    std::vector<RoiWindow> kept;
    for (const RoiWindow& w : windows) {
        bool drop = false;
        for (const RoiWindow& k : kept) {
            if (window_iou(w, k) > iou_threshold) {
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(w);
    }
    return kept;
}

}  // namespace uhr
