#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uhr {

// Absolute epsilon for geometric comparisons at pixel-scale magnitudes.
inline constexpr double kGeomEps = 1e-9;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

enum class BoxKind { HBB, OBB };

/// A horizontal box [x1,y1,x2,y2] or an oriented quad [x1,y1,...,x4,y4],
/// in continuous pixel coordinates of a declared frame.
struct GeomBox {
    BoxKind kind = BoxKind::HBB;
    std::vector<double> coords;

    static GeomBox hbb(double x1, double y1, double x2, double y2) {
        return GeomBox{BoxKind::HBB, {x1, y1, x2, y2}};
    }
    static GeomBox obb(std::vector<double> eight) {
        return GeomBox{BoxKind::OBB, std::move(eight)};
    }

    bool operator==(const GeomBox& other) const = default;
};

struct RectRegion {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool contains(const Point& p) const {  // boundary inclusive
        return p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2;
    }

    bool operator==(const RectRegion& other) const = default;
};

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Empty string when valid, otherwise the reason the box is rejected.
/// HBB: ordered corners and positive area. OBB: simple convex quad
/// (weakly convex accepted) with positive area.
std::string box_validity_error(const GeomBox& box);

inline bool is_valid(const GeomBox& box) { return box_validity_error(box).empty(); }

/// Throws GeometryError when the box is invalid.
void validate(const GeomBox& box);

/// Vertices of the box as a polygon (4 points, consistent winding for HBB).
std::vector<Point> to_polygon(const GeomBox& box);

/// Shoelace area, absolute value. Requires >= 3 vertices.
double polygon_area(std::span<const Point> vertices);

/// Shoelace area keeping the orientation sign.
double polygon_area_signed(std::span<const Point> vertices);

double box_area(const GeomBox& box);

/// Intersection polygon of two valid boxes via half-plane clipping.
/// Empty vector when disjoint.
std::vector<Point> convex_intersection(const GeomBox& a, const GeomBox& b);

/// Area of the intersection polygon; 0 when disjoint.
double intersection_area(const GeomBox& a, const GeomBox& b);

/// area(a n b) / area(a u b); 0 when the union has zero area.
double iou(const GeomBox& a, const GeomBox& b);

/// HBB: midpoint. OBB: mean of the four vertices.
Point center(const GeomBox& box);

/// Diagonal of the minimum enclosing horizontal box. Throws on degenerate input.
double enclosing_diagonal(const GeomBox& box);

/// True iff center(box) lies inside the region, boundary inclusive.
bool contains_center(const RectRegion& region, const GeomBox& box);

}  // namespace uhr
