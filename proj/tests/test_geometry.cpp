#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "uhr/geometry.hpp"

using namespace uhr;

namespace {

// Even-odd ray casting, deliberately unrelated to the clipping code.
bool point_in_polygon(const std::vector<Point>& poly, double x, double y) {
    bool inside = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        if ((poly[i].y > y) != (poly[j].y > y) &&
            x < (poly[j].x - poly[i].x) * (y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x) {
            inside = !inside;
        }
    }
    return inside;
}

struct RasterIou {
    double iou = 0.0;
    double inter_px = 0.0;
};

// Counts subsampled grid points inside each polygon over the joint bounding
// box. Subpixel step 1/3 keeps the boundary error well under the 0.02
// absolute tolerance used below.
RasterIou raster_iou(const std::vector<Point>& a, const std::vector<Point>& b) {
    double min_x = a[0].x, max_x = a[0].x, min_y = a[0].y, max_y = a[0].y;
    for (const auto* poly : {&a, &b}) {
        for (const Point& p : *poly) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    const int sub = 3;
    const double step = 1.0 / sub;
    const double cell = step * step;
    long long na = 0, nb = 0, ni = 0;
    for (double y = min_y + step / 2; y < max_y; y += step) {
        for (double x = min_x + step / 2; x < max_x; x += step) {
            const bool in_a = point_in_polygon(a, x, y);
            const bool in_b = point_in_polygon(b, x, y);
            na += in_a;
            nb += in_b;
            ni += in_a && in_b;
        }
    }
    RasterIou out;
    out.inter_px = ni * cell;
    const long long uni = na + nb - ni;
    out.iou = uni > 0 ? static_cast<double>(ni) / uni : 0.0;
    return out;
}

GeomBox random_obb(std::mt19937& rng, double lo, double hi) {
    std::uniform_real_distribution<double> center(lo + 60.0, hi - 60.0);
    std::uniform_real_distribution<double> half(8.0, 55.0);
    std::uniform_real_distribution<double> angle(0.0, 3.14159);
    const double cx = center(rng), cy = center(rng);
    const double hw = half(rng), hh = half(rng);
    const double t = angle(rng);
    const double c = std::cos(t), s = std::sin(t);
    std::vector<double> coords;
    for (auto [dx, dy] : {std::pair{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}) {
        coords.push_back(cx + dx * c - dy * s);
        coords.push_back(cy + dx * s + dy * c);
    }
    return GeomBox::obb(coords);
}

}  // namespace

TEST_CASE("polygon area fixtures") {
    const std::vector<Point> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(polygon_area(square) == doctest::Approx(1.0));
    const std::vector<Point> tri{{0, 0}, {4, 0}, {0, 3}};
    CHECK(polygon_area(tri) == doctest::Approx(6.0));
    const std::vector<Point> line{{0, 0}, {1, 1}, {2, 2}};
    CHECK(polygon_area(line) == doctest::Approx(0.0));
    const std::vector<Point> two{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(polygon_area(two), GeometryError);
}

TEST_CASE("convex intersection fixtures") {
    const auto a = GeomBox::hbb(0, 0, 10, 10);
    const auto b = GeomBox::hbb(5, 0, 15, 10);
    const auto inter = convex_intersection(a, b);
    REQUIRE(inter.size() >= 3);
    CHECK(polygon_area(inter) == doctest::Approx(50.0));

    const auto self = convex_intersection(a, a);
    REQUIRE(self.size() >= 3);
    CHECK(polygon_area(self) == doctest::Approx(100.0));

    const auto far = GeomBox::hbb(20, 20, 30, 30);
    CHECK(convex_intersection(a, far).empty());
}

TEST_CASE("iou fixtures") {
    const auto a = GeomBox::hbb(0, 0, 10, 10);
    CHECK(iou(a, a) == 1.0);
    const auto b = GeomBox::hbb(5, 0, 15, 10);
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(b, a) == doctest::Approx(1.0 / 3.0));
    const auto far = GeomBox::hbb(20, 20, 30, 30);
    CHECK(iou(a, far) == 0.0);
    // Shared edge only: zero-area contact.
    const auto touching = GeomBox::hbb(10, 0, 20, 10);
    CHECK(iou(a, touching) == doctest::Approx(0.0));
}

TEST_CASE("mixed kind iou") {
    // Axis-aligned square expressed as an OBB must match the HBB result.
    const auto h = GeomBox::hbb(0, 0, 10, 10);
    const auto o = GeomBox::obb({0, 0, 10, 0, 10, 10, 0, 10});
    CHECK(iou(h, o) == doctest::Approx(1.0));
    const auto shifted = GeomBox::hbb(5, 0, 15, 10);
    CHECK(iou(o, shifted) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("center and diagonal fixtures") {
    const auto a = GeomBox::hbb(0, 0, 10, 10);
    CHECK(center(a).x == doctest::Approx(5.0));
    CHECK(center(a).y == doctest::Approx(5.0));
    CHECK(enclosing_diagonal(a) == doctest::Approx(std::sqrt(200.0)));

    const auto b = GeomBox::hbb(0, 0, 2, 2);
    CHECK(center(b).x == doctest::Approx(1.0));
    CHECK(center(b).y == doctest::Approx(1.0));

    const auto c = GeomBox::hbb(0, 0, 3, 4);
    CHECK(enclosing_diagonal(c) == doctest::Approx(5.0));

    const auto par = GeomBox::obb({0, 0, 4, 0, 6, 2, 2, 2});
    CHECK(center(par).x == doctest::Approx(3.0));
    CHECK(center(par).y == doctest::Approx(1.0));

    const auto diamond = GeomBox::obb({0, 1, 1, 0, 2, 1, 1, 2});
    CHECK(enclosing_diagonal(diamond) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("contains_center is boundary inclusive") {
    const RectRegion r{0, 0, 10, 10};
    CHECK(contains_center(r, GeomBox::hbb(4, 4, 6, 6)));
    // Center exactly on the region edge.
    CHECK(contains_center(r, GeomBox::hbb(8, 4, 12, 6)));
    CHECK_FALSE(contains_center(r, GeomBox::hbb(9, 4, 13, 6)));
}

TEST_CASE("validator rejects malformed boxes") {
    CHECK_THROWS_AS(validate(GeomBox::hbb(300, 100, 100, 200)), GeometryError);
    CHECK_THROWS_AS(validate(GeomBox::hbb(0, 0, 0, 10)), GeometryError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(validate(GeomBox::hbb(0, 0, nan, 10)), GeometryError);
    // Self-intersecting quad.
    CHECK_THROWS_AS(validate(GeomBox::obb({0, 0, 4, 4, 4, 0, 0, 4})), GeometryError);
    // Concave quad.
    CHECK_THROWS_AS(validate(GeomBox::obb({0, 0, 4, 0, 1, 1, 0, 4})), GeometryError);
    // Wrong coordinate counts.
    CHECK_FALSE(is_valid(GeomBox{BoxKind::HBB, {0, 0, 10}}));
    CHECK_FALSE(is_valid(GeomBox{BoxKind::OBB, {0, 0, 10, 0, 10, 10}}));
    CHECK(is_valid(GeomBox::obb({0, 0, 10, 0, 10, 10, 0, 10})));
}

TEST_CASE("iou properties on random boxes") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> coord(0.0, 180.0);
    std::uniform_real_distribution<double> size(2.0, 60.0);
    for (int i = 0; i < 300; ++i) {
        const double x1 = coord(rng), y1 = coord(rng);
        const auto a = GeomBox::hbb(x1, y1, x1 + size(rng), y1 + size(rng));
        const double x2 = coord(rng), y2 = coord(rng);
        const auto b = GeomBox::hbb(x2, y2, x2 + size(rng), y2 + size(rng));
        const double ab = iou(a, b);
        const double ba = iou(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        const auto inter = convex_intersection(a, b);
        if (!inter.empty()) {
            CHECK(polygon_area(inter) <= std::min(box_area(a), box_area(b)) + 1e-6);
        }
        // An HBB's enclosing diagonal is its own corner diagonal.
        const double dx = a.coords[2] - a.coords[0];
        const double dy = a.coords[3] - a.coords[1];
        CHECK(enclosing_diagonal(a) == doctest::Approx(std::hypot(dx, dy)));
    }
}

TEST_CASE("polygon iou agrees with a raster oracle") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> shift(-30.0, 30.0);
    int checked = 0;
    for (int i = 0; i < 60; ++i) {
        const auto a = random_obb(rng, 0.0, 220.0);
        GeomBox b = random_obb(rng, 0.0, 220.0);
        if (i % 2 == 0) {
            // Make overlap likely: translate a copy of a.
            b = a;
            const double dx = shift(rng), dy = shift(rng);
            for (size_t k = 0; k < 8; k += 2) {
                b.coords[k] += dx;
                b.coords[k + 1] += dy;
            }
        }
        const auto oracle = raster_iou(to_polygon(a), to_polygon(b));
        if (oracle.inter_px < 100.0) continue;
        ++checked;
        CHECK(std::abs(iou(a, b) - oracle.iou) <= 0.02);
    }
    CHECK(checked >= 20);
}
