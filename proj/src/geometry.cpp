#include "uhr/geometry.hpp"

#include <algorithm>
#include <limits>

namespace uhr {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double signed_area(std::span<const Point> poly) {
    double s = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    return 0.5 * s;
}

}  // namespace

std::string box_validity_error(const GeomBox& box) {
    if (box.kind == BoxKind::HBB) {
        if (box.coords.size() != 4) return "HBB requires 4 coordinates";
        if (!all_finite(box.coords)) return "non-finite coordinate";
        const double x1 = box.coords[0], y1 = box.coords[1];
        const double x2 = box.coords[2], y2 = box.coords[3];
        if (x1 > x2 || y1 > y2) return "misordered corners";
        if ((x2 - x1) * (y2 - y1) <= kGeomEps) return "degenerate zero-area box";
        return {};
    }
    if (box.coords.size() != 8) return "OBB requires 8 coordinates";
    if (!all_finite(box.coords)) return "non-finite coordinate";
    const auto poly = to_polygon(box);
    // Consecutive-edge cross products must not change sign; a bowtie
    // (self-intersecting) or concave quad produces both signs.
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < 4; ++i) {
        const double c = cross(poly[i], poly[(i + 1) % 4], poly[(i + 2) % 4]);
        if (c > kGeomEps) has_pos = true;
        if (c < -kGeomEps) has_neg = true;
    }
    if (has_pos && has_neg) return "non-convex or self-intersecting quad";
    if (std::abs(signed_area(poly)) <= kGeomEps) return "degenerate zero-area quad";
    return {};
}

void validate(const GeomBox& box) {
    const std::string err = box_validity_error(box);
    if (!err.empty()) throw GeometryError("invalid box: " + err);
}

std::vector<Point> to_polygon(const GeomBox& box) {
    if (box.kind == BoxKind::HBB) {
        const double x1 = box.coords.at(0), y1 = box.coords.at(1);
        const double x2 = box.coords.at(2), y2 = box.coords.at(3);
        return {{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}};
    }
    std::vector<Point> poly(4);
    for (int i = 0; i < 4; ++i) poly[i] = {box.coords.at(2 * i), box.coords.at(2 * i + 1)};
    return poly;
}

double polygon_area(std::span<const Point> vertices) {
    if (vertices.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    return std::abs(signed_area(vertices));
}

double polygon_area_signed(std::span<const Point> vertices) {
    if (vertices.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    return signed_area(vertices);
}

double box_area(const GeomBox& box) {
    const auto poly = to_polygon(box);
    return polygon_area(poly);
}

std::vector<Point> convex_intersection(const GeomBox& a, const GeomBox& b) {
    validate(a);
    validate(b);
    std::vector<Point> subject = to_polygon(a);
    std::vector<Point> clip = to_polygon(b);
    if (signed_area(clip) < 0.0) std::reverse(clip.begin(), clip.end());

    // Sutherland-Hodgman: clip the subject against each edge of the
    // positively oriented clip polygon.
    for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Point& c1 = clip[e];
        const Point& c2 = clip[(e + 1) % clip.size()];
        std::vector<Point> out;
        out.reserve(subject.size() + 2);
        for (size_t i = 0; i < subject.size(); ++i) {
            const Point& p = subject[i];
            const Point& q = subject[(i + 1) % subject.size()];
            const double dp = cross(c1, c2, p);
            const double dq = cross(c1, c2, q);
            const bool p_in = dp >= -kGeomEps;
            const bool q_in = dq >= -kGeomEps;
            if (p_in) out.push_back(p);
            if (p_in != q_in) {
                const double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        subject = std::move(out);
    }
    if (subject.size() < 3) subject.clear();
    return subject;
}

double intersection_area(const GeomBox& a, const GeomBox& b) {
    const auto inter_poly = convex_intersection(a, b);
    if (inter_poly.size() < 3) return 0.0;
    const double inter = polygon_area(inter_poly);
    return std::min(inter, std::min(box_area(a), box_area(b)));
}

double iou(const GeomBox& a, const GeomBox& b) {
    const double area_a = box_area(a);
    const double area_b = box_area(b);
    const double inter = intersection_area(a, b);
    const double uni = area_a + area_b - inter;
    if (uni <= kGeomEps) return 0.0;
    return inter / uni;
}

Point center(const GeomBox& box) {
    validate(box);
    if (box.kind == BoxKind::HBB) {
        return {0.5 * (box.coords[0] + box.coords[2]), 0.5 * (box.coords[1] + box.coords[3])};
    }
    Point c{0.0, 0.0};
    for (int i = 0; i < 4; ++i) {
        c.x += box.coords[2 * i];
        c.y += box.coords[2 * i + 1];
    }
    c.x *= 0.25;
    c.y *= 0.25;
    return c;
}

double enclosing_diagonal(const GeomBox& box) {
    validate(box);
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const Point& p : to_polygon(box)) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double w = max_x - min_x, h = max_y - min_y;
    const double diag = std::hypot(w, h);
    if (diag <= kGeomEps) throw GeometryError("degenerate box has no diagonal");
    return diag;
}

bool contains_center(const RectRegion& region, const GeomBox& box) {
    return region.contains(center(box));
}

}  // namespace uhr
