#include "uhr/image.hpp"

#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace uhr {

ImageCanvas make_canvas(int width, int height, cv::Scalar fill) {
    if (width < 1 || height < 1) throw ImageError("canvas dimensions must be positive");
    ImageCanvas c;
    c.mat = cv::Mat(height, width, CV_8UC3, fill);
    return c;
}

ImageCanvas load_image(const std::string& path) {
    ImageCanvas c;
    c.mat = cv::imread(path, cv::IMREAD_COLOR);
    if (c.mat.empty()) throw ImageError("cannot read image: " + path);
    return c;
}

void save_image(const ImageCanvas& image, const std::string& path) {
    if (image.empty()) throw ImageError("refusing to save an empty image");
    if (!cv::imwrite(path, image.mat)) throw ImageError("cannot write image: " + path);
}

ImageCanvas crop(const ImageCanvas& image, const RoiWindow& window) {
    if (window.valid_w < 1 || window.valid_h < 1 || window.x0 < 0 || window.y0 < 0 ||
        window.x0 + window.valid_w > image.width() ||
        window.y0 + window.valid_h > image.height()) {
        throw ImageError("window does not fit the image");
    }
    ImageCanvas out = make_canvas(window.side, window.side);
    const cv::Rect src(window.x0, window.y0, window.valid_w, window.valid_h);
    const cv::Rect dst(0, 0, window.valid_w, window.valid_h);
    image.mat(src).copyTo(out.mat(dst));
    return out;
}

ImageCanvas crop_rect(const ImageCanvas& image, const RectRegion& rect) {
    const int x0 = clamp_index(rect.x1, image.width());
    const int y0 = clamp_index(rect.y1, image.height());
    const int x1 = std::min(image.width(), static_cast<int>(std::llround(rect.x2)));
    const int y1 = std::min(image.height(), static_cast<int>(std::llround(rect.y2)));
    if (x1 <= x0 || y1 <= y0) throw ImageError("empty crop rectangle");
    ImageCanvas out;
    image.mat(cv::Rect(x0, y0, x1 - x0, y1 - y0)).copyTo(out.mat);
    return out;
}

ImageCanvas resize_long_edge(const ImageCanvas& image, int target) {
    if (target < 1) throw ImageError("resize target must be positive");
    const int long_edge = std::max(image.width(), image.height());
    if (long_edge <= target) {
        ImageCanvas out;
        image.mat.copyTo(out.mat);
        return out;
    }
    const double scale = static_cast<double>(target) / long_edge;
    int w, h;
    if (image.width() >= image.height()) {
        w = target;
        h = std::max(1, static_cast<int>(std::llround(image.height() * scale)));
    } else {
        h = target;
        w = std::max(1, static_cast<int>(std::llround(image.width() * scale)));
    }
    ImageCanvas out;
    cv::resize(image.mat, out.mat, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    return out;
}

std::vector<RoiWindow> sliding_tiles(int image_w, int image_h, int side) {
    if (image_w < 1 || image_h < 1) throw ImageError("image dimensions must be positive");
    if (side < 1) throw ImageError("tile side must be positive");
    std::vector<RoiWindow> tiles;
    for (int y = 0; y < image_h; y += side) {
        for (int x = 0; x < image_w; x += side) {
            RoiWindow t;
            t.x0 = x;
            t.y0 = y;
            t.side = side;
            t.valid_w = std::min(side, image_w - x);
            t.valid_h = std::min(side, image_h - y);
            t.image_w = image_w;
            t.image_h = image_h;
            tiles.push_back(t);
        }
    }
    return tiles;
}

RoiWindow oracle_crop(const std::vector<GeomBox>& targets, int side,
                      int image_w, int image_h) {
    if (targets.empty()) throw ImageError("oracle window needs at least one target");
    double sx = 0.0;
    double sy = 0.0;
    for (const GeomBox& box : targets) {
        const Point c = center(box);
        sx += c.x;
        sy += c.y;
    }
    Point anchor{sx / static_cast<double>(targets.size()),
                 sy / static_cast<double>(targets.size())};
    // Targets sit inside the image, so the centroid does too; clamp anyway
    // to be safe against degenerate annotations at the border.
    anchor.x = std::min(std::max(anchor.x, 0.0), static_cast<double>(image_w));
    anchor.y = std::min(std::max(anchor.y, 0.0), static_cast<double>(image_h));
    return make_roi(anchor, side, image_w, image_h);
}

std::shared_ptr<const ImageCanvas> ImageCache::get(const std::string& path) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = cache_.find(path);
        if (it != cache_.end()) return it->second;
    }
    auto loaded = std::make_shared<ImageCanvas>(load_image(path));
    std::lock_guard<std::mutex> lock(mu_);
    const auto [it, inserted] = cache_.emplace(path, std::move(loaded));
    return it->second;
}

void ImageCache::clear() {
    std::lock_guard<std::mutex> lock(mu_);
    cache_.clear();
}

}  // namespace uhr
