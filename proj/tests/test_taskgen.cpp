#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "uhr/dataset.hpp"
#include "uhr/eval.hpp"
#include "uhr/rle.hpp"
#include "uhr/taskgen.hpp"
#include "uhr/tasks.hpp"

using namespace uhr;

namespace {

GenConfig quick_config() {
    GenConfig cfg;
    return cfg;  // library defaults are already desk scale
}

const SceneObject* object_with_box(const Scene& scene, const GeomBox& box) {
    for (const auto& obj : scene.objects)
        if (obj.box == box) return &obj;
    return nullptr;
}

const SceneObject* object_by_id(const Scene& scene, int id) {
    for (const auto& obj : scene.objects)
        if (obj.id == id) return &obj;
    return nullptr;
}

// Independent compass oracle: nearest of the eight 45-degree sector centers.
int oracle_sector(Point a, Point b) {
    double deg = std::atan2(b.x - a.x, a.y - b.y) * 180.0 / std::acos(-1.0);
    if (deg < 0) deg += 360.0;
    return static_cast<int>(std::lround(deg / 45.0)) % 8;
}

double oracle_boundary_margin(Point a, Point b) {
    double deg = std::atan2(b.x - a.x, a.y - b.y) * 180.0 / std::acos(-1.0);
    if (deg < 0) deg += 360.0;
    double best = 360.0;
    for (int k = 0; k < 8; ++k) {
        double boundary = 22.5 + 45.0 * k;
        double d = std::fabs(deg - boundary);
        best = std::min(best, std::min(d, 360.0 - d));
    }
    return best;
}

// The phrase between the given prefix and suffix of a query.
std::string slice(const std::string& query, const std::string& prefix,
                  const std::string& suffix) {
    size_t from = query.find(prefix);
    REQUIRE(from != std::string::npos);
    from += prefix.size();
    size_t to = query.find(suffix, from);
    REQUIRE(to != std::string::npos);
    return query.substr(from, to - from);
}

std::vector<const SceneObject*> category_objects(const Scene& scene,
                                                 const std::string& cat) {
    std::vector<const SceneObject*> out;
    for (const auto& obj : scene.objects)
        if (obj.category == cat) out.push_back(&obj);
    return out;
}

}  // namespace

TEST_CASE("equal seeds reproduce scenes and renders exactly") {
    GenConfig cfg = quick_config();
    Scene a = generate_scene(cfg, 7);
    Scene b = generate_scene(cfg, 7);
    CHECK(a == b);
    CHECK(generate_scene(cfg, 8) != a);

    ImageCanvas ra = render_scene(a);
    ImageCanvas rb = render_scene(b);
    CHECK(cv::norm(ra.mat, rb.mat, cv::NORM_INF) == 0.0);

    Scene pa = generate_pattern_scene(cfg, 11, "grid");
    Scene pb = generate_pattern_scene(cfg, 11, "grid");
    CHECK(pa == pb);
}

TEST_CASE("scenes respect canvas bounds, separation, and kind homogeneity") {
    GenConfig cfg = quick_config();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scene scene = generate_scene(cfg, seed);
        CHECK(scene.objects.size() >= static_cast<size_t>(cfg.min_objects));
        CHECK(scene.objects.size() <= static_cast<size_t>(cfg.max_objects));
        std::map<std::string, BoxKind> kind_of;
        for (const auto& obj : scene.objects) {
            for (size_t i = 0; i < obj.box.coords.size(); i += 2) {
                CHECK(obj.box.coords[i] >= 0.0);
                CHECK(obj.box.coords[i] <= cfg.width);
                CHECK(obj.box.coords[i + 1] >= 0.0);
                CHECK(obj.box.coords[i + 1] <= cfg.height);
            }
            auto [it, inserted] = kind_of.emplace(obj.category, obj.box.kind);
            if (!inserted) CHECK(it->second == obj.box.kind);
        }
        for (size_t i = 0; i < scene.objects.size(); ++i)
            for (size_t j = i + 1; j < scene.objects.size(); ++j)
                CHECK(distance(center(scene.objects[i].box), center(scene.objects[j].box)) >=
                      cfg.min_separation - 1e-9);
    }
}

TEST_CASE("generation rejects bad parameters and infeasible density") {
    GenConfig cfg = quick_config();
    GenConfig zero = cfg;
    zero.min_objects = 0;
    CHECK_THROWS_AS(generate_scene(zero, 1), TaskGenError);

    GenConfig tiny = cfg;
    tiny.width = 200;
    tiny.height = 200;
    CHECK_THROWS_AS(generate_scene(tiny, 1), TaskGenError);

    GenConfig inverted = cfg;
    inverted.max_objects = inverted.min_objects - 1;
    CHECK_THROWS_AS(generate_scene(inverted, 1), TaskGenError);

    GenConfig dense = cfg;
    dense.width = 256;
    dense.height = 256;
    dense.min_objects = 80;
    dense.max_objects = 80;
    CHECK_THROWS_AS(generate_scene(dense, 1), TaskGenError);

    GenConfig vast = cfg;
    vast.width = 4096;
    vast.height = 4096;
    vast.min_objects = 50;
    vast.max_objects = 50;
    CHECK(generate_scene(vast, 1).objects.size() == 50);
}

TEST_CASE("pattern layouts place the dominant category as described") {
    GenConfig cfg = quick_config();
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
        for (const char* layout : kLayoutNames) {
            Scene scene = generate_pattern_scene(cfg, seed, layout);
            CHECK(scene.layout == layout);
            auto pattern = category_objects(scene, scene.layout_category);
            CHECK(pattern.size() >= 9);
            for (size_t i = 0; i < scene.objects.size(); ++i)
                for (size_t j = i + 1; j < scene.objects.size(); ++j)
                    CHECK(distance(center(scene.objects[i].box),
                                   center(scene.objects[j].box)) >=
                          cfg.min_separation - 1e-9);

            std::vector<Point> centers;
            for (const auto* obj : pattern) centers.push_back(center(obj->box));
            if (scene.layout == "cluster") {
                for (size_t i = 0; i < centers.size(); ++i)
                    for (size_t j = i + 1; j < centers.size(); ++j)
                        CHECK(distance(centers[i], centers[j]) <= 342.0);
            } else if (scene.layout == "line") {
                Point p0 = centers.front(), p1 = centers.back();
                double len = distance(p0, p1);
                REQUIRE(len > 0.0);
                for (const Point& p : centers) {
                    double cross = (p1.x - p0.x) * (p.y - p0.y) - (p1.y - p0.y) * (p.x - p0.x);
                    CHECK(std::fabs(cross) / len <= 10.0);
                }
            } else if (scene.layout == "grid") {
                CHECK((pattern.size() == 9 || pattern.size() == 12 || pattern.size() == 16));
                std::vector<double> xs;
                for (const Point& p : centers) xs.push_back(p.x);
                std::sort(xs.begin(), xs.end());
                int columns = 1;
                for (size_t i = 1; i < xs.size(); ++i) {
                    double gap = xs[i] - xs[i - 1];
                    CHECK((gap <= 8.0 || gap >= 50.0));
                    if (gap >= 50.0) ++columns;
                }
                CHECK((columns == 3 || columns == 4));
                CHECK(pattern.size() % columns == 0);
            }
        }
    }
    CHECK_THROWS_AS(generate_pattern_scene(cfg, 1, "spiral"), TaskGenError);
}

TEST_CASE("derivation is deterministic and rejects empty scenes") {
    GenConfig cfg = quick_config();
    Scene scene = generate_scene(cfg, 42);
    Scene copy = scene;
    auto a = derive_sample(scene, "DrR", cfg, 9);
    auto b = derive_sample(copy, "DrR", cfg, 9);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(*a == *b);
    CHECK(scene == copy);  // identical marker additions

    Scene empty;
    empty.width = 512;
    empty.height = 512;
    CHECK_THROWS_AS(derive_sample(empty, "GD", cfg, 0), TaskGenError);
    CHECK_THROWS_AS(derive_sample(scene, "XX", cfg, 0), TaskGenError);
}

TEST_CASE("direction filter follows the sector margin arithmetic") {
    GenConfig cfg = quick_config();
    Scene scene;
    scene.width = 1280;
    scene.height = 960;
    scene.seed = 5;
    auto place = [&](int id, double cx, double cy) {
        SceneObject obj;
        obj.id = id;
        obj.category = "vehicle";
        obj.subcategory = "sedan";
        obj.color = "white";
        obj.box = GeomBox::hbb(cx - 10, cy - 10, cx + 10, cy + 10);
        scene.objects.push_back(obj);
    };

    // Bearing 23 degrees is 0.5 degrees from the 22.5 boundary: both pair
    // orders sit inside the exclusion zone, so the scene is rejected.
    double rad = 23.0 * std::acos(-1.0) / 180.0;
    place(0, 400, 400);
    place(1, 400 + 300 * std::sin(rad), 400 - 300 * std::cos(rad));
    CHECK_FALSE(derive_sample(scene, "DrR", cfg, 1).has_value());

    // Bearing 44 degrees clears the margin and lands in the second sector.
    scene.objects.clear();
    rad = 44.0 * std::acos(-1.0) / 180.0;
    place(0, 400, 400);
    place(1, 400 + 300 * std::sin(rad), 400 - 300 * std::cos(rad));
    auto sample = derive_sample(scene, "DrR", cfg, 1);
    REQUIRE(sample.has_value());
    REQUIRE(scene.markers.size() == 2);
    const SceneObject* ref = object_by_id(scene, scene.markers[0].object_id);
    const SceneObject* cand = object_by_id(scene, scene.markers[1].object_id);
    CHECK(scene.markers[0].color == "red");
    CHECK(scene.markers[1].color == "blue");
    int sector = oracle_sector(center(ref->box), center(cand->box));
    CHECK(sample->target_option == static_cast<char>('A' + sector));
    CHECK(sample->choices[static_cast<size_t>(sector)] ==
          (sector == 1 ? "northeast" : "southwest"));
}

TEST_CASE("distance filter enforces the runner-up ratio") {
    GenConfig cfg = quick_config();
    Scene scene;
    scene.width = 1280;
    scene.height = 960;
    scene.seed = 6;
    auto place = [&](int id, double cx, double cy) {
        SceneObject obj;
        obj.id = id;
        obj.category = "ship";
        obj.subcategory = "ferry";
        obj.color = "gray";
        obj.box = GeomBox::hbb(cx - 10, cy - 10, cx + 10, cy + 10);
        scene.objects.push_back(obj);
    };

    // Equilateral triangle: every reference sees two equal distances, ratio
    // 1.0 under the 1.3 floor, so no assignment survives.
    place(0, 400, 400);
    place(1, 600, 400);
    place(2, 500, 400 + 100 * std::sqrt(3.0));
    CHECK_FALSE(derive_sample(scene, "DsR", cfg, 2).has_value());

    // Collinear spread passes for at least one reference; re-derive the
    // answer from the stored markers.
    scene.objects.clear();
    scene.markers.clear();
    place(0, 200, 300);
    place(1, 400, 300);
    place(2, 1100, 300);
    auto sample = derive_sample(scene, "DsR", cfg, 2);
    REQUIRE(sample.has_value());
    REQUIRE(scene.markers.size() >= 3);
    CHECK(scene.markers[0].color == "red");
    Point ref = center(object_by_id(scene, scene.markers[0].object_id)->box);
    std::vector<double> dists;
    for (size_t i = 1; i < scene.markers.size(); ++i)
        dists.push_back(distance(ref, center(object_by_id(scene, scene.markers[i].object_id)->box)));
    size_t best = 0;
    for (size_t i = 1; i < dists.size(); ++i)
        if (dists[i] < dists[best]) best = i;
    CHECK(sample->target_option == static_cast<char>('A' + best));
    std::vector<double> sorted = dists;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[1] >= cfg.distance_ratio * sorted[0] - 1e-9);
    CHECK(sample->choices.front() == "the object outlined in blue");
}

TEST_CASE("a balanced suite hits every quota with self-consistent targets") {
    SuiteRequest req;
    req.seed = 5;
    for (const char* task : kTaskCodes) req.quotas.emplace_back(task, 4);

    GeneratedSuite suite = generate_suite(req);
    GeneratedSuite again = generate_suite(req);
    CHECK(suite.samples == again.samples);
    CHECK(suite.scenes == again.scenes);
    REQUIRE(suite.samples.size() == 64);
    REQUIRE(suite.scenes.size() == 64);

    std::map<std::string, int> per_task;
    std::set<std::string> ids, images;
    for (const auto& s : suite.samples) {
        ++per_task[s.task];
        CHECK(ids.insert(s.id).second);
        CHECK(images.insert(s.image_ref).second);
        CHECK(sample_validity_error(s).empty());
        ScoreRecord rec = score_sample(s, target_as_prediction(s));
        CHECK(rec.parse_status == ParseStatus::kOk);
        CHECK(rec.raw_score == 1.0);
    }
    for (const char* task : kTaskCodes) CHECK(per_task[task] == 4);
}

TEST_CASE("stored answers survive re-derivation from scene geometry") {
    SuiteRequest req;
    req.seed = 17;
    for (const char* task : kTaskCodes) req.quotas.emplace_back(task, 3);
    GeneratedSuite suite = generate_suite(req);

    for (size_t i = 0; i < suite.samples.size(); ++i) {
        const Sample& s = suite.samples[i];
        const Scene& scene = suite.scenes[i];

        if (s.task == "BG") {
            const SceneObject* obj = object_with_box(scene, s.target_boxes.front());
            REQUIRE(obj != nullptr);
            int twins = 0;
            for (const auto& other : scene.objects)
                if (other.color == obj->color && other.category == obj->category) ++twins;
            CHECK(twins == 1);
        } else if (s.task == "CG") {
            const SceneObject* obj = object_with_box(scene, s.target_boxes.front());
            REQUIRE(obj != nullptr);
            auto peers = category_objects(scene, obj->category);
            std::sort(peers.begin(), peers.end(),
                      [](const SceneObject* a, const SceneObject* b) {
                          return center(a->box).x < center(b->box).x;
                      });
            static const char* kWords[] = {"first", "second", "third",  "fourth", "fifth",
                                           "sixth", "seventh", "eighth", "ninth"};
            size_t rank = peers.size();
            for (size_t w = 0; w < 9; ++w)
                if (s.query.find(std::string(" ") + kWords[w] + " ") != std::string::npos)
                    rank = w;
            REQUIRE(rank < peers.size());
            CHECK(peers[rank]->box == obj->box);
        } else if (s.task == "RD" || s.task == "RC") {
            REQUIRE(s.region.has_value());
            std::string cat = s.task == "RD"
                                  ? slice(s.query, "region, report a bounding box for every ",
                                          " whose center")
                                  : slice(s.query, "How many ", " objects have");
            std::vector<GeomBox> expected;
            for (const auto* obj : category_objects(scene, cat))
                if (s.region->contains(center(obj->box))) expected.push_back(obj->box);
            if (s.task == "RD") {
                CHECK(s.target_boxes == expected);
            } else {
                CHECK(s.target_count == static_cast<long long>(expected.size()));
            }
        } else if (s.task == "GD") {
            std::string cat = slice(s.query, "Find every ", " in the image");
            auto objs = category_objects(scene, cat);
            REQUIRE(objs.size() == s.target_boxes.size());
            for (size_t k = 0; k < objs.size(); ++k) CHECK(objs[k]->box == s.target_boxes[k]);
        } else if (s.task == "MCR") {
            std::string phrase = slice(s.query, "Find all ", " objects and report");
            std::vector<GeomBox> expected;
            for (const auto& obj : scene.objects)
                if (phrase == obj.color + " " + obj.category) expected.push_back(obj.box);
            CHECK(s.target_boxes == expected);
        } else if (s.task == "GC" || s.task == "CC") {
            std::string phrase = slice(s.query, "How many ", " objects appear");
            long long count = 0;
            for (const auto& obj : scene.objects) {
                bool hit = s.task == "GC" ? phrase == obj.category
                                          : phrase == obj.color + " " + obj.category;
                if (hit) ++count;
            }
            CHECK(s.target_count == count);
        } else if (s.task == "CRC") {
            std::string cat = slice(s.query, "numbers of ", " objects whose centers");
            long long left = 0, right = 0;
            for (const auto* obj : category_objects(scene, cat))
                (center(obj->box).x < scene.width / 2.0 ? left : right) += 1;
            CHECK(s.target_count == std::llabs(left - right));
        } else if (s.task == "OC" || s.task == "FGR") {
            REQUIRE(scene.markers.size() == 1);
            const SceneObject* obj = object_by_id(scene, scene.markers[0].object_id);
            const std::string& picked =
                s.choices[static_cast<size_t>(s.target_option - 'A')];
            CHECK(picked == (s.task == "OC" ? obj->category : obj->subcategory));
        } else if (s.task == "RS" || s.task == "CS") {
            std::string phrase = s.task == "RS"
                                     ? slice(s.query, "mask of the ", ".")
                                     : slice(s.query, "inner panel of the ", ".");
            const SceneObject* hit = nullptr;
            for (const auto& obj : scene.objects)
                if (phrase == obj.color + " " + obj.category) {
                    CHECK(hit == nullptr);
                    hit = &obj;
                }
            REQUIRE(hit != nullptr);
            const GeomBox& box = s.task == "RS" ? hit->box : *hit->component;
            RleMask expected = box_fill_mask(box, scene.height, scene.width);
            RleMask stored = rle_decompress(s.target_mask, s.height, s.width);
            CHECK(stored.counts == expected.counts);
        } else if (s.task == "DrR") {
            REQUIRE(scene.markers.size() == 2);
            Point a = center(object_by_id(scene, scene.markers[0].object_id)->box);
            Point b = center(object_by_id(scene, scene.markers[1].object_id)->box);
            CHECK(oracle_boundary_margin(a, b) >= req.config.direction_margin_deg - 1e-9);
            CHECK(s.target_option == static_cast<char>('A' + oracle_sector(a, b)));
        } else if (s.task == "DsR") {
            REQUIRE(scene.markers.size() >= 3);
            Point ref = center(object_by_id(scene, scene.markers[0].object_id)->box);
            std::vector<double> dists;
            for (size_t m = 1; m < scene.markers.size(); ++m)
                dists.push_back(
                    distance(ref, center(object_by_id(scene, scene.markers[m].object_id)->box)));
            size_t best = 0;
            for (size_t d = 1; d < dists.size(); ++d)
                if (dists[d] < dists[best]) best = d;
            CHECK(s.target_option == static_cast<char>('A' + best));
            std::vector<double> sorted = dists;
            std::sort(sorted.begin(), sorted.end());
            CHECK(sorted[1] >= req.config.distance_ratio * sorted[0] - 1e-9);
        } else if (s.task == "PDR") {
            REQUIRE(!scene.layout.empty());
            const std::string& picked =
                s.choices[static_cast<size_t>(s.target_option - 'A')];
            std::set<std::string> unique(s.choices.begin(), s.choices.end());
            CHECK(unique.size() == 4);
            Scene probe = generate_pattern_scene(req.config, scene.seed, scene.layout);
            CHECK(probe.layout == scene.layout);
            // The correct option is the one describing the placed layout.
            std::map<std::string, std::string> wording;
            for (const char* name : kLayoutNames) {
                Scene fresh = generate_pattern_scene(req.config, scene.seed, name);
                auto derived = derive_sample(fresh, "PDR", req.config, 0xD1CE);
                REQUIRE(derived.has_value());
                wording[name] =
                    derived->choices[static_cast<size_t>(derived->target_option - 'A')];
            }
            CHECK(picked == wording[scene.layout]);
        }
    }
}

TEST_CASE("splits honor quotas, stay disjoint, and report deficits") {
    SuiteRequest req;
    req.seed = 23;
    for (const char* task : kTaskCodes) req.quotas.emplace_back(task, 4);
    GeneratedSuite suite = generate_suite(req);

    SplitPlan plan;
    for (const char* task : kTaskCodes) {
        plan.development[task] = 1;
        plan.validation[task] = 2;
        plan.test[task] = 1;
    }
    SplitResult split = build_splits(suite.samples, plan, 99);
    CHECK(split.development.size() == 16);
    CHECK(split.validation.size() == 32);
    CHECK(split.test.size() == 16);

    std::set<std::string> seen;
    for (const auto* part : {&split.development, &split.validation, &split.test})
        for (const auto& s : *part) CHECK(seen.insert(s.id).second);

    SplitResult replay = build_splits(suite.samples, plan, 99);
    CHECK(replay.validation == split.validation);

    SplitPlan greedy = plan;
    greedy.validation["GD"] = 5;
    CHECK_THROWS_WITH_AS(build_splits(suite.samples, greedy, 99),
                         doctest::Contains("GD needs 7, have 4"), TaskGenError);
}

TEST_CASE("scene records round-trip through the sidecar format") {
    GenConfig cfg = quick_config();
    Scene scene = generate_scene(cfg, 301);
    derive_sample(scene, "DrR", cfg, 3);
    std::string line = scene_to_json_line(scene, "images/x.png");
    auto [image, parsed] = scene_from_json_line(line);
    CHECK(image == "images/x.png");
    CHECK(parsed == scene);

    Scene pattern = generate_pattern_scene(cfg, 302, "cluster");
    auto [pimage, pparsed] = scene_from_json_line(scene_to_json_line(pattern, "p.png"));
    CHECK(pparsed == pattern);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "uhr_taskgen_scenes";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "scenes.jsonl");
        out << scene_to_json_line(scene, "a.png") << "\n\n"
            << scene_to_json_line(pattern, "b.png") << "\n";
    }
    auto loaded = load_scenes((dir / "scenes.jsonl").string());
    CHECK(loaded.size() == 2);
    CHECK(loaded.at("a.png") == scene);
    {
        std::ofstream out(dir / "dup.jsonl");
        out << scene_to_json_line(scene, "a.png") << "\n"
            << scene_to_json_line(scene, "a.png") << "\n";
    }
    CHECK_THROWS_WITH_AS(load_scenes((dir / "dup.jsonl").string()),
                         doctest::Contains("record 2"), TaskGenError);
    fs::remove_all(dir);
}

TEST_CASE("written suites load back intact") {
    SuiteRequest req;
    req.seed = 77;
    req.quotas = {{"BG", 2}, {"DrR", 1}, {"RS", 1}};
    GeneratedSuite suite = generate_suite(req);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "uhr_taskgen_suite";
    fs::remove_all(dir);
    write_suite(suite, dir.string());

    std::vector<Sample> loaded = load_dataset((dir / "samples.jsonl").string());
    CHECK(loaded == suite.samples);
    auto scenes = load_scenes((dir / "scenes.jsonl").string());
    CHECK(scenes.size() == suite.samples.size());
    for (const auto& s : suite.samples) {
        ImageCanvas img = load_image((dir / s.image_ref).string());
        CHECK(img.width() == s.width);
        CHECK(img.height() == s.height);
        CHECK(scenes.count(s.image_ref) == 1);
    }
    fs::remove_all(dir);
}
