#include "uhr/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "json.hpp"

#include "uhr/hashing.hpp"
#include "uhr/rle.hpp"
#include "uhr/tasks.hpp"

namespace uhr {

namespace {

using ordered_json = nlohmann::ordered_json;

// Deterministic across platforms: raw mt19937_64 words, no std distributions.
class SceneRng {
public:
    explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t word() { return engine_(); }

    int index(int n) {
        if (n <= 0) throw TaskGenError("draw from an empty range");
        return static_cast<int>(word() % static_cast<std::uint64_t>(n));
    }

    int range(int lo, int hi) { return lo + index(hi - lo + 1); }

    double real(double lo, double hi) {
        double unit = static_cast<double>(word() >> 11) * 0x1.0p-53;
        return lo + unit * (hi - lo);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(static_cast<int>(i))]);
    }

private:
    std::mt19937_64 engine_;
};

struct CategoryEntry {
    const char* name;
    std::vector<const char*> subcategories;
};

const std::vector<CategoryEntry>& taxonomy() {
    static const std::vector<CategoryEntry> t = {
        {"vehicle", {"sedan", "pickup truck", "bus", "van", "camper"}},
        {"aircraft", {"airliner", "fighter jet", "cargo plane", "light aircraft", "seaplane"}},
        {"ship", {"tanker", "fishing boat", "ferry", "sailboat", "tugboat"}},
        {"storage tank", {"oil tank", "silo", "water tower", "gas holder"}},
    };
    return t;
}

struct NamedColor {
    const char* name;
    cv::Scalar bgr;
};

const std::vector<NamedColor>& fill_colors() {
    static const std::vector<NamedColor> c = {
        {"white", {235, 235, 235}}, {"gray", {150, 150, 150}},
        {"green", {80, 150, 70}},   {"orange", {40, 130, 235}},
        {"brown", {60, 90, 135}},   {"purple", {150, 70, 120}},
    };
    return c;
}

// Index 0 always marks the reference object; the rest enumerate candidates.
const std::vector<NamedColor>& marker_colors() {
    static const std::vector<NamedColor> c = {
        {"red", {0, 0, 255}},     {"blue", {255, 0, 0}},
        {"yellow", {0, 255, 255}}, {"magenta", {255, 0, 255}},
        {"cyan", {255, 255, 0}},
    };
    return c;
}

cv::Scalar color_value(const std::vector<NamedColor>& palette, const std::string& name) {
    for (const auto& entry : palette)
        if (name == entry.name) return entry.bgr;
    throw TaskGenError("unknown color name: " + name);
}

constexpr const char* kCompass[8] = {"north", "northeast", "east", "southeast",
                                     "south", "southwest", "west", "northwest"};

constexpr const char* kOrdinals[9] = {"first", "second", "third",   "fourth", "fifth",
                                      "sixth", "seventh", "eighth", "ninth"};

const char* layout_description(const std::string& layout) {
    if (layout == "scatter") return "Spread loosely across the whole image with no obvious structure";
    if (layout == "cluster") return "Packed together in one tight cluster";
    if (layout == "line") return "Arranged in a row along a single straight line";
    if (layout == "grid") return "Laid out on a regular grid with even spacing";
    throw TaskGenError("unknown layout: " + layout);
}

// Half extents of the axis-aligned cover of a hw x hh rectangle at angle deg.
Point rotated_extent(double hw, double hh, double angle_deg) {
    double rad = angle_deg * std::acos(-1.0) / 180.0;
    double c = std::fabs(std::cos(rad)), s = std::fabs(std::sin(rad));
    return {hw * c + hh * s, hw * s + hh * c};
}

GeomBox build_box(BoxKind kind, Point center, double hw, double hh, double angle_deg) {
    if (kind == BoxKind::HBB)
        return GeomBox::hbb(center.x - hw, center.y - hh, center.x + hw, center.y + hh);
    double rad = angle_deg * std::acos(-1.0) / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    std::vector<double> coords;
    for (auto [dx, dy] : {std::pair{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}) {
        coords.push_back(center.x + dx * c - dy * s);
        coords.push_back(center.y + dx * s + dy * c);
    }
    return GeomBox::obb(std::move(coords));
}

bool far_enough(const std::vector<SceneObject>& placed, Point p, double min_sep) {
    for (const auto& obj : placed)
        if (distance(center(obj.box), p) < min_sep) return false;
    return true;
}

void check_config(const GenConfig& cfg) {
    if (cfg.width < 256 || cfg.height < 256)
        throw TaskGenError("canvas must be at least 256x256");
    if (cfg.min_objects < 1) throw TaskGenError("at least one object is required");
    if (cfg.max_objects < cfg.min_objects)
        throw TaskGenError("max_objects below min_objects");
}

struct ObjectDraft {
    int category_index = 0;
    BoxKind kind = BoxKind::HBB;
    double hw = 0.0, hh = 0.0, angle = 0.0;
};

ObjectDraft draft_object(SceneRng& rng, int category_index, BoxKind kind) {
    ObjectDraft d;
    d.category_index = category_index;
    d.kind = kind;
    d.hw = rng.range(9, 20);
    d.hh = rng.range(9, 20);
    d.angle = kind == BoxKind::OBB ? rng.real(0.0, 180.0) : 0.0;
    return d;
}

SceneObject materialize(SceneRng& rng, const ObjectDraft& d, Point center, int id) {
    const auto& cat = taxonomy()[static_cast<size_t>(d.category_index)];
    SceneObject obj;
    obj.id = id;
    obj.category = cat.name;
    obj.subcategory = cat.subcategories[static_cast<size_t>(rng.index(
        static_cast<int>(cat.subcategories.size())))];
    obj.color = fill_colors()[static_cast<size_t>(rng.index(
        static_cast<int>(fill_colors().size())))].name;
    obj.box = build_box(d.kind, center, d.hw, d.hh, d.angle);
    if (d.kind == BoxKind::HBB) {
        double x1 = obj.box.coords[0], y1 = obj.box.coords[1];
        double w = 2.0 * d.hw, h = 2.0 * d.hh;
        obj.component = GeomBox::hbb(std::round(x1 + 0.25 * w), std::round(y1 + 0.2 * h),
                                     std::round(x1 + 0.75 * w), std::round(y1 + 0.55 * h));
    }
    return obj;
}

// Rejection-samples a rounded center respecting canvas margins and the
// separation floor. Throws after cfg.max_place_attempts misses.
Point place_center(SceneRng& rng, const GenConfig& cfg, const ObjectDraft& d,
                   const std::vector<SceneObject>& placed, double min_sep) {
    Point ext = rotated_extent(d.hw, d.hh, d.angle);
    double mx = ext.x + 8.0, my = ext.y + 8.0;
    for (int attempt = 0; attempt < cfg.max_place_attempts; ++attempt) {
        Point p{std::round(rng.real(mx, cfg.width - mx)),
                std::round(rng.real(my, cfg.height - my))};
        if (far_enough(placed, p, min_sep)) return p;
    }
    throw TaskGenError("placement infeasible: separation " + std::to_string(min_sep) +
                       " cannot host another object");
}

// Category kinds for one scene: every object of a category shares a box
// kind so multi-box targets stay format-homogeneous.
std::vector<BoxKind> draw_category_kinds(SceneRng& rng) {
    std::vector<BoxKind> kinds;
    bool any_hbb = false;
    for (size_t i = 0; i < taxonomy().size(); ++i) {
        BoxKind k = rng.index(2) == 0 ? BoxKind::HBB : BoxKind::OBB;
        any_hbb = any_hbb || k == BoxKind::HBB;
        kinds.push_back(k);
    }
    if (!any_hbb) kinds[0] = BoxKind::HBB;
    return kinds;
}

}  // namespace

Scene generate_scene(const GenConfig& cfg, std::uint64_t seed) {
    check_config(cfg);
    SceneRng rng(seed);
    Scene scene{cfg.width, cfg.height, seed, {}, {}, "", ""};
    std::vector<BoxKind> kinds = draw_category_kinds(rng);
    int n = rng.range(cfg.min_objects, cfg.max_objects);
    for (int i = 0; i < n; ++i) {
        int ci = rng.index(static_cast<int>(taxonomy().size()));
        ObjectDraft d = draft_object(rng, ci, kinds[static_cast<size_t>(ci)]);
        Point p = place_center(rng, cfg, d, scene.objects, cfg.min_separation);
        scene.objects.push_back(materialize(rng, d, p, i));
    }
    return scene;
}

Scene generate_pattern_scene(const GenConfig& cfg, std::uint64_t seed,
                             const std::string& layout) {
    check_config(cfg);
    layout_description(layout);  // validates the name
    SceneRng rng(seed);
    Scene scene{cfg.width, cfg.height, seed, {}, {}, layout, ""};

    int pattern_ci = rng.index(static_cast<int>(taxonomy().size()));
    scene.layout_category = taxonomy()[static_cast<size_t>(pattern_ci)].name;
    BoxKind pattern_kind = rng.index(2) == 0 ? BoxKind::HBB : BoxKind::OBB;
    const double sep = cfg.min_separation;
    const double edge = 40.0;  // fits the widest extent plus the marker pad

    std::vector<Point> centers;
    if (layout == "scatter") {
        int n = rng.range(9, 13);
        centers.resize(static_cast<size_t>(n));
    } else if (layout == "cluster") {
        int n = rng.range(9, 13);
        const double radius =
            std::min(170.0, std::min(cfg.width, cfg.height) / 2.0 - edge - 10.0);
        if (radius <= 0.0) throw TaskGenError("canvas too small for a cluster layout");
        Point c{rng.real(radius + edge, cfg.width - radius - edge),
                rng.real(radius + edge, cfg.height - radius - edge)};
        for (int i = 0; i < n; ++i) {
            for (int attempt = 0;; ++attempt) {
                if (attempt >= cfg.max_place_attempts)
                    throw TaskGenError("cluster placement stalled");
                double r = radius * std::sqrt(rng.real(0.0, 1.0));
                double a = rng.real(0.0, 2.0 * std::acos(-1.0));
                Point p{std::round(c.x + r * std::cos(a)), std::round(c.y + r * std::sin(a))};
                bool clear = true;
                for (const auto& q : centers)
                    if (distance(p, q) < sep) { clear = false; break; }
                if (clear) { centers.push_back(p); break; }
            }
        }
    } else if (layout == "line") {
        int n = rng.range(9, 13);
        double step = sep * rng.real(1.05, 1.25);
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 200) throw TaskGenError("line placement stalled");
            double rad = rng.real(0.0, std::acos(-1.0));
            double dx = std::cos(rad), dy = std::sin(rad);
            if (dx < 0.0) { dx = -dx; dy = -dy; }  // undirected line, keep dx >= 0
            double len = step * (n - 1);
            double x_lo = edge, x_hi = cfg.width - edge - dx * len;
            double y_lo = edge + std::max(0.0, -dy * len);
            double y_hi = cfg.height - edge - std::max(0.0, dy * len);
            if (x_hi < x_lo || y_hi < y_lo) continue;
            Point anchor{rng.real(x_lo, x_hi), rng.real(y_lo, y_hi)};
            for (int i = 0; i < n; ++i) {
                double jitter = rng.real(-4.0, 4.0);
                centers.push_back({std::round(anchor.x + dx * step * i - dy * jitter),
                                   std::round(anchor.y + dy * step * i + dx * jitter)});
            }
            break;
        }
    } else {  // grid
        int rows = rng.range(3, 4), cols = rng.range(3, 4);
        double sx = sep * rng.real(1.15, 1.4), sy = sep * rng.real(1.15, 1.4);
        if (cfg.width - edge - sx * (cols - 1) < edge ||
            cfg.height - edge - sy * (rows - 1) < edge)
            throw TaskGenError("canvas too small for a grid layout");
        Point anchor{rng.real(edge, cfg.width - edge - sx * (cols - 1)),
                     rng.real(edge, cfg.height - edge - sy * (rows - 1))};
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                centers.push_back({std::round(anchor.x + sx * c + rng.real(-3.0, 3.0)),
                                   std::round(anchor.y + sy * r + rng.real(-3.0, 3.0))});
    }

    int id = 0;
    for (const Point& p : centers) {
        ObjectDraft d = draft_object(rng, pattern_ci, pattern_kind);
        if (layout == "scatter") {
            Point placed = place_center(rng, cfg, d, scene.objects, sep);
            scene.objects.push_back(materialize(rng, d, placed, id++));
        } else {
            scene.objects.push_back(materialize(rng, d, p, id++));
        }
    }

    std::vector<BoxKind> kinds = draw_category_kinds(rng);
    int distractors = rng.range(2, 4);
    for (int i = 0; i < distractors; ++i) {
        int ci = rng.index(static_cast<int>(taxonomy().size()) - 1);
        if (ci >= pattern_ci) ++ci;
        ObjectDraft d = draft_object(rng, ci, kinds[static_cast<size_t>(ci)]);
        Point p = place_center(rng, cfg, d, scene.objects, sep);
        scene.objects.push_back(materialize(rng, d, p, id++));
    }
    return scene;
}

ImageCanvas render_scene(const Scene& scene) {
    if (scene.width < 1 || scene.height < 1) throw TaskGenError("empty scene canvas");
    const cv::Scalar base{58, 66, 60};
    ImageCanvas canvas = make_canvas(scene.width, scene.height, base);
    SceneRng rng(mix_seed(scene.seed, 0x7e97));
    int dots = scene.width * scene.height / 256;
    for (int i = 0; i < dots; ++i) {
        int x = rng.index(scene.width), y = rng.index(scene.height);
        int delta = rng.range(-14, 14);
        auto& px = canvas.mat.at<cv::Vec3b>(y, x);
        for (int ch = 0; ch < 3; ++ch)
            px[ch] = static_cast<unsigned char>(
                std::clamp(static_cast<int>(base[ch]) + delta, 0, 255));
    }
    for (const auto& obj : scene.objects) {
        cv::Scalar fill = color_value(fill_colors(), obj.color);
        if (obj.box.kind == BoxKind::HBB) {
            cv::rectangle(canvas.mat,
                          cv::Point(static_cast<int>(obj.box.coords[0]),
                                    static_cast<int>(obj.box.coords[1])),
                          cv::Point(static_cast<int>(obj.box.coords[2]) - 1,
                                    static_cast<int>(obj.box.coords[3]) - 1),
                          fill, cv::FILLED);
        } else {
            std::vector<cv::Point> poly;
            for (size_t i = 0; i < 8; i += 2)
                poly.emplace_back(static_cast<int>(std::lround(obj.box.coords[i])),
                                  static_cast<int>(std::lround(obj.box.coords[i + 1])));
            cv::fillConvexPoly(canvas.mat, poly, fill);
        }
        if (obj.component) {
            cv::rectangle(canvas.mat,
                          cv::Point(static_cast<int>(obj.component->coords[0]),
                                    static_cast<int>(obj.component->coords[1])),
                          cv::Point(static_cast<int>(obj.component->coords[2]) - 1,
                                    static_cast<int>(obj.component->coords[3]) - 1),
                          fill * 0.55, cv::FILLED);
        }
    }
    for (const auto& marker : scene.markers) {
        const SceneObject* obj = nullptr;
        for (const auto& candidate : scene.objects)
            if (candidate.id == marker.object_id) { obj = &candidate; break; }
        if (!obj) throw TaskGenError("marker references a missing object");
        double x1 = obj->box.coords[0], y1 = obj->box.coords[1];
        double x2 = x1, y2 = y1;
        for (size_t i = 0; i < obj->box.coords.size(); i += 2) {
            x1 = std::min(x1, obj->box.coords[i]);
            x2 = std::max(x2, obj->box.coords[i]);
            y1 = std::min(y1, obj->box.coords[i + 1]);
            y2 = std::max(y2, obj->box.coords[i + 1]);
        }
        cv::rectangle(canvas.mat,
                      cv::Point(std::max(0, static_cast<int>(x1) - 4),
                                std::max(0, static_cast<int>(y1) - 4)),
                      cv::Point(std::min(scene.width - 1, static_cast<int>(x2) + 4),
                                std::min(scene.height - 1, static_cast<int>(y2) + 4)),
                      color_value(marker_colors(), marker.color), 3);
    }
    return canvas;
}

namespace {

Sample stub(const Scene& scene, const std::string& task) {
    Sample s;
    s.width = scene.width;
    s.height = scene.height;
    s.task = task;
    return s;
}

AnswerFormat single_format(BoxKind k) {
    return k == BoxKind::HBB ? AnswerFormat::kBoxHbb : AnswerFormat::kBoxObb;
}

AnswerFormat list_format(BoxKind k) {
    return k == BoxKind::HBB ? AnswerFormat::kBoxListHbb : AnswerFormat::kBoxListObb;
}

std::vector<std::string> present_categories(const Scene& scene, SceneRng& rng) {
    std::vector<std::string> cats;
    for (const auto& entry : taxonomy()) {
        for (const auto& obj : scene.objects)
            if (obj.category == entry.name) { cats.emplace_back(entry.name); break; }
    }
    rng.shuffle(cats);
    return cats;
}

std::vector<const SceneObject*> of_category(const Scene& scene, const std::string& cat) {
    std::vector<const SceneObject*> out;
    for (const auto& obj : scene.objects)
        if (obj.category == cat) out.push_back(&obj);
    return out;
}

// Objects whose color + category pair appears exactly once in the scene, so
// a short referring phrase is unambiguous.
std::vector<const SceneObject*> uniquely_described(const Scene& scene) {
    std::map<std::pair<std::string, std::string>, int> tally;
    for (const auto& obj : scene.objects) ++tally[{obj.color, obj.category}];
    std::vector<const SceneObject*> out;
    for (const auto& obj : scene.objects)
        if (tally[{obj.color, obj.category}] == 1) out.push_back(&obj);
    return out;
}

RectRegion region_around(SceneRng& rng, const Scene& scene, Point anchor) {
    double rw = rng.real(scene.width / 8.0, scene.width / 4.0);
    double rh = rng.real(scene.height / 8.0, scene.height / 4.0);
    double cx = anchor.x + rng.real(-scene.width / 16.0, scene.width / 16.0);
    double cy = anchor.y + rng.real(-scene.height / 16.0, scene.height / 16.0);
    RectRegion r;
    r.x1 = std::max(0.0, std::round(cx - rw));
    r.y1 = std::max(0.0, std::round(cy - rh));
    r.x2 = std::min<double>(scene.width, std::round(cx + rw));
    r.y2 = std::min<double>(scene.height, std::round(cy + rh));
    return r;
}

std::vector<GeomBox> boxes_in_region(const std::vector<const SceneObject*>& objs,
                                     const RectRegion& region) {
    std::vector<GeomBox> out;
    for (const auto* obj : objs)
        if (region.contains(center(obj->box))) out.push_back(obj->box);
    return out;
}

std::optional<Sample> derive_gd(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    if (cats.empty()) return std::nullopt;
    auto objs = of_category(scene, cats.front());
    Sample s = stub(scene, "GD");
    s.query = "Find every " + cats.front() +
              " in the image and report a bounding box for each one.";
    s.answer_format = list_format(objs.front()->box.kind);
    for (const auto* obj : objs) s.target_boxes.push_back(obj->box);
    return s;
}

std::optional<Sample> derive_rd(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    if (cats.empty()) return std::nullopt;
    auto objs = of_category(scene, cats.front());
    const SceneObject* anchor = objs[static_cast<size_t>(rng.index(static_cast<int>(objs.size())))];
    RectRegion region = region_around(rng, scene, center(anchor->box));
    std::vector<GeomBox> targets = boxes_in_region(objs, region);
    if (targets.empty()) return std::nullopt;
    Sample s = stub(scene, "RD");
    s.query = "Within the given rectangular region, report a bounding box for every " +
              cats.front() + " whose center lies inside it.";
    s.region = region;
    s.answer_format = list_format(objs.front()->box.kind);
    s.target_boxes = std::move(targets);
    return s;
}

std::optional<Sample> derive_bg(Scene& scene, SceneRng& rng) {
    auto unique = uniquely_described(scene);
    if (unique.empty()) return std::nullopt;
    const SceneObject* obj = unique[static_cast<size_t>(rng.index(static_cast<int>(unique.size())))];
    Sample s = stub(scene, "BG");
    s.query = "Locate the " + obj->color + " " + obj->category +
              " and report its bounding box.";
    s.answer_format = single_format(obj->box.kind);
    s.target_boxes = {obj->box};
    return s;
}

std::optional<Sample> derive_cg(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    for (const auto& cat : cats) {
        auto objs = of_category(scene, cat);
        if (objs.size() < 2) continue;
        std::sort(objs.begin(), objs.end(), [](const SceneObject* a, const SceneObject* b) {
            return center(a->box).x < center(b->box).x;
        });
        bool separated = true;
        for (size_t i = 1; i < objs.size(); ++i)
            if (center(objs[i]->box).x - center(objs[i - 1]->box).x < 8.0) {
                separated = false;
                break;
            }
        if (!separated) continue;
        int k = rng.index(static_cast<int>(std::min<size_t>(objs.size(), 9)));
        Sample s = stub(scene, "CG");
        s.query = "Identify the " + std::string(kOrdinals[k]) + " " + cat +
                  " counting from the left edge of the image and report its bounding box.";
        s.answer_format = single_format(objs.front()->box.kind);
        s.target_boxes = {objs[static_cast<size_t>(k)]->box};
        return s;
    }
    return std::nullopt;
}

std::optional<Sample> derive_mcr(Scene& scene, SceneRng& rng) {
    std::map<std::pair<std::string, std::string>, std::vector<const SceneObject*>> combos;
    for (const auto& obj : scene.objects) combos[{obj.color, obj.category}].push_back(&obj);
    std::vector<const std::pair<const std::pair<std::string, std::string>,
                                std::vector<const SceneObject*>>*> entries;
    for (const auto& entry : combos) entries.push_back(&entry);
    rng.shuffle(entries);
    std::stable_sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
        return (a->second.size() >= 2) > (b->second.size() >= 2);
    });
    const auto& [key, objs] = *entries.front();
    Sample s = stub(scene, "MCR");
    s.query = "Find all " + key.first + " " + key.second +
              " objects and report a bounding box for each one.";
    s.answer_format = list_format(objs.front()->box.kind);
    for (const auto* obj : objs) s.target_boxes.push_back(obj->box);
    return s;
}

std::optional<Sample> derive_oc(Scene& scene, SceneRng& rng) {
    const SceneObject& obj =
        scene.objects[static_cast<size_t>(rng.index(static_cast<int>(scene.objects.size())))];
    scene.markers.push_back({obj.id, "red"});
    std::vector<std::string> options;
    for (const auto& entry : taxonomy()) options.emplace_back(entry.name);
    rng.shuffle(options);
    Sample s = stub(scene, "OC");
    s.query = "Which option names the object inside the red outline?";
    s.answer_format = AnswerFormat::kOption;
    s.choices = options;
    s.target_option = static_cast<char>(
        'A' + (std::find(options.begin(), options.end(), obj.category) - options.begin()));
    return s;
}

std::optional<Sample> derive_fgr(Scene& scene, SceneRng& rng) {
    const SceneObject& obj =
        scene.objects[static_cast<size_t>(rng.index(static_cast<int>(scene.objects.size())))];
    scene.markers.push_back({obj.id, "red"});
    std::vector<std::string> siblings;
    for (const auto& entry : taxonomy())
        if (obj.category == entry.name)
            for (const auto* sub : entry.subcategories)
                if (obj.subcategory != sub) siblings.emplace_back(sub);
    if (siblings.size() < 3) return std::nullopt;
    rng.shuffle(siblings);
    std::vector<std::string> options(siblings.begin(), siblings.begin() + 3);
    options.push_back(obj.subcategory);
    rng.shuffle(options);
    Sample s = stub(scene, "FGR");
    s.query = "Which option names the specific type of the object inside the red outline?";
    s.answer_format = AnswerFormat::kOption;
    s.choices = options;
    s.target_option = static_cast<char>(
        'A' + (std::find(options.begin(), options.end(), obj.subcategory) - options.begin()));
    return s;
}

// Axis-aligned picks only: the mask target must be reproducible from the
// horizontal box prompt the pipeline's segmenter receives.
std::optional<Sample> derive_rs(Scene& scene, SceneRng& rng) {
    std::vector<const SceneObject*> unique;
    for (const auto* obj : uniquely_described(scene))
        if (obj->box.kind == BoxKind::HBB) unique.push_back(obj);
    if (unique.empty()) return std::nullopt;
    const SceneObject* obj = unique[static_cast<size_t>(rng.index(static_cast<int>(unique.size())))];
    Sample s = stub(scene, "RS");
    s.query = "Produce a segmentation mask of the " + obj->color + " " + obj->category + ".";
    s.answer_format = AnswerFormat::kMask;
    s.target_mask = rle_compress(box_fill_mask(obj->box, scene.height, scene.width));
    return s;
}

std::optional<Sample> derive_cs(Scene& scene, SceneRng& rng) {
    std::vector<const SceneObject*> eligible;
    for (const auto* obj : uniquely_described(scene))
        if (obj->component) eligible.push_back(obj);
    if (eligible.empty()) return std::nullopt;
    const SceneObject* obj =
        eligible[static_cast<size_t>(rng.index(static_cast<int>(eligible.size())))];
    Sample s = stub(scene, "CS");
    s.query = "Produce a segmentation mask of the darker inner panel of the " + obj->color +
              " " + obj->category + ".";
    s.answer_format = AnswerFormat::kMask;
    s.target_mask = rle_compress(box_fill_mask(*obj->component, scene.height, scene.width));
    return s;
}

std::optional<Sample> derive_gc(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    if (cats.empty()) return std::nullopt;
    Sample s = stub(scene, "GC");
    s.query = "How many " + cats.front() +
              " objects appear in the image? Respond with a single integer.";
    s.answer_format = AnswerFormat::kCount;
    s.target_count = static_cast<long long>(of_category(scene, cats.front()).size());
    return s;
}

std::optional<Sample> derive_rc(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    if (cats.empty()) return std::nullopt;
    auto objs = of_category(scene, cats.front());
    const SceneObject* anchor = objs[static_cast<size_t>(rng.index(static_cast<int>(objs.size())))];
    RectRegion region = region_around(rng, scene, center(anchor->box));
    size_t count = boxes_in_region(objs, region).size();
    if (count == 0) return std::nullopt;
    Sample s = stub(scene, "RC");
    s.query = "How many " + cats.front() +
              " objects have their centers inside the given rectangular region? "
              "Respond with a single integer.";
    s.region = region;
    s.answer_format = AnswerFormat::kCount;
    s.target_count = static_cast<long long>(count);
    return s;
}

std::optional<Sample> derive_cc(Scene& scene, SceneRng& rng) {
    std::map<std::pair<std::string, std::string>, int> combos;
    for (const auto& obj : scene.objects) ++combos[{obj.color, obj.category}];
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& [key, count] : combos) keys.push_back(key);
    rng.shuffle(keys);
    const auto& key = keys.front();
    Sample s = stub(scene, "CC");
    s.query = "How many " + key.first + " " + key.second +
              " objects appear in the image? Respond with a single integer.";
    s.answer_format = AnswerFormat::kCount;
    s.target_count = combos[key];
    return s;
}

std::optional<Sample> derive_crc(Scene& scene, SceneRng& rng) {
    auto cats = present_categories(scene, rng);
    if (cats.empty()) return std::nullopt;
    auto objs = of_category(scene, cats.front());
    long long left = 0;
    for (const auto* obj : objs)
        if (center(obj->box).x < scene.width / 2.0) ++left;
    long long right = static_cast<long long>(objs.size()) - left;
    Sample s = stub(scene, "CRC");
    s.query = "Consider the left and right halves of the image, split at x = " +
              std::to_string(scene.width / 2) +
              ". Report the absolute difference between the numbers of " + cats.front() +
              " objects whose centers fall in each half. Respond with a single integer.";
    s.answer_format = AnswerFormat::kCount;
    s.target_count = std::llabs(left - right);
    return s;
}

// Compass bearing of b as seen from a; up is north, degrees in [0, 360).
double bearing_deg(Point a, Point b) {
    double deg = std::atan2(b.x - a.x, a.y - b.y) * 180.0 / std::acos(-1.0);
    return deg < 0.0 ? deg + 360.0 : deg;
}

// Distance from the bearing to the nearest 45 degree sector boundary.
double boundary_distance_deg(double bearing) {
    double d = std::fmod(bearing - 22.5, 45.0);
    if (d < 0.0) d += 45.0;
    return std::min(d, 45.0 - d);
}

int compass_sector(double bearing) {
    return static_cast<int>(std::fmod(bearing + 22.5, 360.0) / 45.0);
}

std::optional<Sample> derive_drr(Scene& scene, SceneRng& rng, const GenConfig& cfg) {
    int n = static_cast<int>(scene.objects.size());
    if (n < 2) return std::nullopt;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) pairs.emplace_back(i, j);
    rng.shuffle(pairs);
    for (auto [ai, bi] : pairs) {
        Point a = center(scene.objects[static_cast<size_t>(ai)].box);
        Point b = center(scene.objects[static_cast<size_t>(bi)].box);
        double bearing = bearing_deg(a, b);
        if (boundary_distance_deg(bearing) < cfg.direction_margin_deg) continue;
        scene.markers.push_back({scene.objects[static_cast<size_t>(ai)].id, "red"});
        scene.markers.push_back({scene.objects[static_cast<size_t>(bi)].id, "blue"});
        Sample s = stub(scene, "DrR");
        s.query = "In which compass direction does the blue-outlined object lie relative "
                  "to the red-outlined object? Treat up as north.";
        s.answer_format = AnswerFormat::kOption;
        for (const char* name : kCompass) s.choices.emplace_back(name);
        s.target_option = static_cast<char>('A' + compass_sector(bearing));
        return s;
    }
    return std::nullopt;
}

std::optional<Sample> derive_dsr(Scene& scene, SceneRng& rng, const GenConfig& cfg) {
    int n = static_cast<int>(scene.objects.size());
    if (n < 3) return std::nullopt;
    std::vector<int> refs(static_cast<size_t>(n));
    std::iota(refs.begin(), refs.end(), 0);
    rng.shuffle(refs);
    for (int ref : refs) {
        std::vector<int> others;
        for (int i = 0; i < n; ++i)
            if (i != ref) others.push_back(i);
        rng.shuffle(others);
        int m = std::min<int>(4, static_cast<int>(others.size()));
        others.resize(static_cast<size_t>(m));
        Point rc = center(scene.objects[static_cast<size_t>(ref)].box);
        std::vector<double> dist;
        for (int i : others)
            dist.push_back(distance(rc, center(scene.objects[static_cast<size_t>(i)].box)));
        std::vector<int> order(static_cast<size_t>(m));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return dist[static_cast<size_t>(a)] < dist[static_cast<size_t>(b)]; });
        int best, runner;
        if (cfg.distance_nearest) {
            best = order[0];
            runner = order[1];
            if (dist[static_cast<size_t>(runner)] <
                cfg.distance_ratio * dist[static_cast<size_t>(best)])
                continue;
        } else {
            best = order[static_cast<size_t>(m - 1)];
            runner = order[static_cast<size_t>(m - 2)];
            if (dist[static_cast<size_t>(best)] <
                cfg.distance_ratio * dist[static_cast<size_t>(runner)])
                continue;
        }
        scene.markers.push_back({scene.objects[static_cast<size_t>(ref)].id, "red"});
        Sample s = stub(scene, "DsR");
        for (int i = 0; i < m; ++i) {
            const std::string color = marker_colors()[static_cast<size_t>(i + 1)].name;
            scene.markers.push_back(
                {scene.objects[static_cast<size_t>(others[static_cast<size_t>(i)])].id, color});
            s.choices.push_back("the object outlined in " + color);
        }
        s.query = std::string("Starting from the red-outlined reference object, which "
                              "outlined candidate is the ") +
                  (cfg.distance_nearest ? "closest to" : "farthest from") +
                  " it? Distances are measured between object centers.";
        s.answer_format = AnswerFormat::kOption;
        s.target_option = static_cast<char>('A' + best);
        return s;
    }
    return std::nullopt;
}

std::optional<Sample> derive_pdr(Scene& scene, SceneRng& rng) {
    if (scene.layout.empty()) return std::nullopt;
    std::vector<int> perm = {0, 1, 2, 3};
    rng.shuffle(perm);
    Sample s = stub(scene, "PDR");
    s.query = "Which option best describes how the " + scene.layout_category +
              " objects are arranged across the image?";
    s.answer_format = AnswerFormat::kOption;
    for (int i = 0; i < 4; ++i) {
        const std::string layout = kLayoutNames[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        s.choices.emplace_back(layout_description(layout));
        if (layout == scene.layout) s.target_option = static_cast<char>('A' + i);
    }
    return s;
}

}  // namespace

std::optional<Sample> derive_sample(Scene& scene, const std::string& task,
                                    const GenConfig& cfg, std::uint64_t salt) {
    if (scene.objects.empty()) throw TaskGenError("cannot derive from an empty scene");
    SceneRng rng(mix_seed(scene.seed, mix_seed(salt, fnv1a(task))));
    if (task == "GD") return derive_gd(scene, rng);
    if (task == "RD") return derive_rd(scene, rng);
    if (task == "BG") return derive_bg(scene, rng);
    if (task == "CG") return derive_cg(scene, rng);
    if (task == "MCR") return derive_mcr(scene, rng);
    if (task == "OC") return derive_oc(scene, rng);
    if (task == "FGR") return derive_fgr(scene, rng);
    if (task == "RS") return derive_rs(scene, rng);
    if (task == "CS") return derive_cs(scene, rng);
    if (task == "GC") return derive_gc(scene, rng);
    if (task == "RC") return derive_rc(scene, rng);
    if (task == "CC") return derive_cc(scene, rng);
    if (task == "CRC") return derive_crc(scene, rng);
    if (task == "DrR") return derive_drr(scene, rng, cfg);
    if (task == "DsR") return derive_dsr(scene, rng, cfg);
    if (task == "PDR") return derive_pdr(scene, rng);
    throw TaskGenError("unknown task code: " + task);
}

GeneratedSuite generate_suite(const SuiteRequest& req) {
    check_config(req.config);
    std::map<std::string, bool> seen;
    for (const auto& [task, quota] : req.quotas) {
        if (!is_task_code(task)) throw TaskGenError("unknown task code: " + task);
        if (seen[task]) throw TaskGenError("duplicate quota for task " + task);
        seen[task] = true;
        if (quota < 0) throw TaskGenError("negative quota for task " + task);
    }

    GeneratedSuite suite;
    for (size_t ti = 0; ti < req.quotas.size(); ++ti) {
        const auto& [task, quota] = req.quotas[ti];
        std::string prefix = task;
        std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        for (int k = 0; k < quota; ++k) {
            bool done = false;
            for (int attempt = 0; attempt < req.config.scene_attempts && !done; ++attempt) {
                std::uint64_t seed = mix_seed(
                    req.seed, mix_seed(fnv1a(task), static_cast<std::uint64_t>(k) * 1000003ull +
                                                        static_cast<std::uint64_t>(attempt)));
                Scene scene;
                if (task == "PDR") {
                    SceneRng pick(mix_seed(seed, 0xFACE));
                    scene = generate_pattern_scene(
                        req.config, seed,
                        kLayoutNames[static_cast<size_t>(pick.index(4))]);
                } else {
                    scene = generate_scene(req.config, seed);
                }
                auto sample = derive_sample(scene, task, req.config, 0xD1CE);
                if (!sample) continue;
                std::ostringstream id;
                id << prefix << "_" << std::setw(5) << std::setfill('0') << k;
                sample->id = id.str();
                sample->image_ref = req.image_dir + "/" + sample->id + ".png";
                std::string err = sample_validity_error(*sample);
                if (!err.empty())
                    throw TaskGenError("generated sample failed validation: " + err);
                suite.samples.push_back(std::move(*sample));
                suite.scenes.push_back(std::move(scene));
                done = true;
            }
            if (!done)
                throw TaskGenError("task " + task + ": no viable scene within " +
                                   std::to_string(req.config.scene_attempts) + " attempts");
        }
    }
    return suite;
}

namespace {

ordered_json box_to_json(const GeomBox& box) {
    ordered_json j;
    j["kind"] = box.kind == BoxKind::HBB ? "hbb" : "obb";
    j["coords"] = box.coords;
    return j;
}

GeomBox box_from_json(const ordered_json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<double> coords = j.at("coords").get<std::vector<double>>();
    if (kind == "hbb" && coords.size() == 4)
        return GeomBox::hbb(coords[0], coords[1], coords[2], coords[3]);
    if (kind == "obb" && coords.size() == 8) return GeomBox::obb(std::move(coords));
    throw TaskGenError("malformed box in scene record");
}

}  // namespace

std::string scene_to_json_line(const Scene& scene, const std::string& image_ref) {
    ordered_json j;
    j["image"] = image_ref;
    j["width"] = scene.width;
    j["height"] = scene.height;
    j["seed"] = scene.seed;
    if (!scene.layout.empty()) {
        j["layout"] = scene.layout;
        j["layout_category"] = scene.layout_category;
    }
    j["objects"] = ordered_json::array();
    for (const auto& obj : scene.objects) {
        ordered_json o;
        o["id"] = obj.id;
        o["category"] = obj.category;
        o["subcategory"] = obj.subcategory;
        o["color"] = obj.color;
        o["box"] = box_to_json(obj.box);
        if (obj.component) o["component"] = box_to_json(*obj.component);
        j["objects"].push_back(std::move(o));
    }
    j["markers"] = ordered_json::array();
    for (const auto& marker : scene.markers)
        j["markers"].push_back({{"object", marker.object_id}, {"color", marker.color}});
    return j.dump();
}

std::pair<std::string, Scene> scene_from_json_line(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
        throw TaskGenError(std::string("scene record is not valid JSON: ") + e.what());
    }
    try {
        Scene scene;
        scene.width = j.at("width").get<int>();
        scene.height = j.at("height").get<int>();
        scene.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("layout")) {
            scene.layout = j.at("layout").get<std::string>();
            scene.layout_category = j.at("layout_category").get<std::string>();
        }
        for (const auto& o : j.at("objects")) {
            SceneObject obj;
            obj.id = o.at("id").get<int>();
            obj.category = o.at("category").get<std::string>();
            obj.subcategory = o.at("subcategory").get<std::string>();
            obj.color = o.at("color").get<std::string>();
            obj.box = box_from_json(o.at("box"));
            if (o.contains("component")) obj.component = box_from_json(o.at("component"));
            scene.objects.push_back(std::move(obj));
        }
        for (const auto& m : j.at("markers"))
            scene.markers.push_back(
                {m.at("object").get<int>(), m.at("color").get<std::string>()});
        return {j.at("image").get<std::string>(), std::move(scene)};
    } catch (const ordered_json::exception& e) {
        throw TaskGenError(std::string("malformed scene record: ") + e.what());
    }
}

std::map<std::string, Scene> load_scenes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TaskGenError("cannot open scene file: " + path);
    std::map<std::string, Scene> scenes;
    std::string line;
    size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            auto [image, scene] = scene_from_json_line(line);
            if (!scenes.emplace(image, std::move(scene)).second)
                throw TaskGenError("duplicate image " + image);
        } catch (const TaskGenError& e) {
            throw TaskGenError("record " + std::to_string(number) + ": " + e.what());
        }
    }
    return scenes;
}

void write_suite(const GeneratedSuite& suite, const std::string& out_dir) {
    if (suite.samples.size() != suite.scenes.size())
        throw TaskGenError("suite samples and scenes are out of step");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    for (size_t i = 0; i < suite.samples.size(); ++i) {
        fs::path target = fs::path(out_dir) / suite.samples[i].image_ref;
        fs::create_directories(target.parent_path());
        save_image(render_scene(suite.scenes[i]), target.string());
    }
    save_dataset((fs::path(out_dir) / "samples.jsonl").string(), suite.samples);
    std::ofstream scenes((fs::path(out_dir) / "scenes.jsonl").string());
    if (!scenes) throw TaskGenError("cannot write scene sidecar in " + out_dir);
    for (size_t i = 0; i < suite.samples.size(); ++i)
        scenes << scene_to_json_line(suite.scenes[i], suite.samples[i].image_ref) << "\n";
}

SplitResult build_splits(const std::vector<Sample>& samples, const SplitPlan& plan,
                         std::uint64_t seed) {
    std::map<std::string, std::vector<size_t>> by_task;
    for (size_t i = 0; i < samples.size(); ++i) by_task[samples[i].task].push_back(i);

    auto quota = [](const std::map<std::string, int>& m, const std::string& task) {
        auto it = m.find(task);
        return it == m.end() ? 0 : it->second;
    };
    std::vector<std::string> tasks;
    for (const auto* part : {&plan.development, &plan.validation, &plan.test})
        for (const auto& [task, n] : *part)
            if (std::find(tasks.begin(), tasks.end(), task) == tasks.end())
                tasks.push_back(task);

    std::string deficits;
    for (const auto& task : tasks) {
        int need = quota(plan.development, task) + quota(plan.validation, task) +
                   quota(plan.test, task);
        int have = static_cast<int>(by_task[task].size());
        if (have < need)
            deficits += (deficits.empty() ? "" : "; ") + task + " needs " +
                        std::to_string(need) + ", have " + std::to_string(have);
    }
    if (!deficits.empty()) throw TaskGenError("split quota shortfall: " + deficits);

    SplitResult result;
    std::map<std::string, int> split_of_image;
    auto take = [&](std::vector<size_t>& pool, int n, std::vector<Sample>& out, int split_id) {
        std::vector<size_t> chosen(pool.begin(), pool.begin() + n);
        pool.erase(pool.begin(), pool.begin() + n);
        std::sort(chosen.begin(), chosen.end());
        for (size_t i : chosen) {
            auto [it, inserted] = split_of_image.emplace(samples[i].image_ref, split_id);
            if (!inserted && it->second != split_id)
                throw TaskGenError("image " + samples[i].image_ref +
                                   " would straddle two splits");
            out.push_back(samples[i]);
        }
    };
    for (const auto& task : tasks) {
        auto& pool = by_task[task];
        SceneRng rng(mix_seed(seed, fnv1a(task)));
        rng.shuffle(pool);
        take(pool, quota(plan.development, task), result.development, 0);
        take(pool, quota(plan.validation, task), result.validation, 1);
        take(pool, quota(plan.test, task), result.test, 2);
    }
    return result;
}

}  // namespace uhr
