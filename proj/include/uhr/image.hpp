#pragma once

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <opencv2/core.hpp>

#include "uhr/coord.hpp"
#include "uhr/geometry.hpp"

namespace uhr {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit BGR pixel canvas.
struct ImageCanvas {
    cv::Mat mat;

    int width() const { return mat.cols; }
    int height() const { return mat.rows; }
    bool empty() const { return mat.empty(); }
};

ImageCanvas make_canvas(int width, int height, cv::Scalar fill = {0, 0, 0});

/// Lossless read/write; throws ImageError on failure.
ImageCanvas load_image(const std::string& path);
void save_image(const ImageCanvas& image, const std::string& path);

/// side x side crop: pixel-exact copy of the window's valid content at the
/// top-left, right/bottom zero filled.
ImageCanvas crop(const ImageCanvas& image, const RoiWindow& window);

/// Pixel-exact copy of a rectangle, rounded to pixel indices.
ImageCanvas crop_rect(const ImageCanvas& image, const RectRegion& rect);

/// Area-averaged downscale until the long edge equals target; the short edge
/// rounds to the nearest pixel. Images already at or below target pass
/// through unchanged.
ImageCanvas resize_long_edge(const ImageCanvas& image, int target);

/// Fixed-stride tiling: ceil(W/side) * ceil(H/side) windows, boundary tiles
/// clipped (and padded at crop time).
std::vector<RoiWindow> sliding_tiles(int image_w, int image_h, int side);

/// Window centered on the centroid of the target box centers.
/// Throws ImageError when targets is empty.
RoiWindow oracle_crop(const std::vector<GeomBox>& targets, int side,
                      int image_w, int image_h);

/// Memoized loader, safe for concurrent readers.
class ImageCache {
public:
    std::shared_ptr<const ImageCanvas> get(const std::string& path);
    void clear();

private:
    std::mutex mu_;
    std::unordered_map<std::string, std::shared_ptr<const ImageCanvas>> cache_;
};

}  // namespace uhr
