#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uhr/dataset.hpp"
#include "uhr/geometry.hpp"
#include "uhr/image.hpp"

namespace uhr {

class TaskGenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One rendered object. Axis-aligned objects carry a darker inner panel in
/// component, the segmentation target for part-level queries.
struct SceneObject {
    int id = 0;
    std::string category;
    std::string subcategory;
    std::string color;
    GeomBox box;
    std::optional<GeomBox> component;

    bool operator==(const SceneObject&) const = default;
};

/// Colored outline drawn around one object so a query can reference it.
struct SceneMarker {
    int object_id = 0;
    std::string color;

    bool operator==(const SceneMarker&) const = default;
};

/// A synthetic desk-scale scene. The seed pins every placement decision, so
/// equal seeds reproduce the scene bit for bit. layout names the placement
/// pattern of layout_category's objects; empty means plain scattering.
struct Scene {
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;
    std::vector<SceneMarker> markers;
    std::string layout;
    std::string layout_category;

    bool operator==(const Scene&) const = default;
};

struct GenConfig {
    int width = 1280;
    int height = 960;
    int min_objects = 8;
    int max_objects = 14;        // plain scenes; pattern scenes size themselves
    double min_separation = 64.0;  // center-to-center floor, pixels
    int max_place_attempts = 1000;
    int scene_attempts = 64;     // fresh scenes tried before a derivation gives up
    double direction_margin_deg = 10.0;  // sector-boundary exclusion zone
    double distance_ratio = 1.3;  // runner-up / winner distance floor
    bool distance_nearest = true;  // ask for the nearest candidate, else farthest
};

/// Deterministic placement layouts a pattern scene can use.
inline constexpr std::array<const char*, 4> kLayoutNames = {
    "scatter", "cluster", "line", "grid"};

/// Rejection-sampled scene; throws TaskGenError when the canvas is too
/// small, no objects are requested, or placement stalls.
Scene generate_scene(const GenConfig& cfg, std::uint64_t seed);

/// Scene whose dominant category follows the named layout; a few objects of
/// other categories are scattered as distractors.
Scene generate_pattern_scene(const GenConfig& cfg, std::uint64_t seed,
                             const std::string& layout);

/// Draws the scene: textured background, filled objects, panels, outlines.
ImageCanvas render_scene(const Scene& scene);

/// Derives one sample of the given task from the scene, or nullopt when the
/// scene fails the task's eligibility or ambiguity filters. Marker-based
/// tasks append the outlines they need to the scene. id and image_ref are
/// left empty for the caller.
std::optional<Sample> derive_sample(Scene& scene, const std::string& task,
                                    const GenConfig& cfg, std::uint64_t salt);

struct SuiteRequest {
    GenConfig config;
    std::vector<std::pair<std::string, int>> quotas;  // unique task codes
    std::uint64_t seed = 1;
    std::string image_dir = "images";
};

/// Samples with their scenes, parallel by index; samples[i].image_ref names
/// the file write_suite renders from scenes[i].
struct GeneratedSuite {
    std::vector<Sample> samples;
    std::vector<Scene> scenes;
};

/// Fills every quota exactly, regenerating scenes until each derivation
/// succeeds. Pure function of the request.
GeneratedSuite generate_suite(const SuiteRequest& req);

/// Writes images, samples.jsonl, and the scenes.jsonl sidecar under out_dir.
void write_suite(const GeneratedSuite& suite, const std::string& out_dir);

/// Sidecar record tying a rendered image to its scene geometry.
std::string scene_to_json_line(const Scene& scene, const std::string& image_ref);
std::pair<std::string, Scene> scene_from_json_line(const std::string& line);
std::map<std::string, Scene> load_scenes(const std::string& path);

struct SplitPlan {
    std::map<std::string, int> development;  // per-task quotas
    std::map<std::string, int> validation;
    std::map<std::string, int> test;
};

struct SplitResult {
    std::vector<Sample> development;
    std::vector<Sample> validation;
    std::vector<Sample> test;
};

/// Seeded disjoint partition honoring every quota; a shortfall throws with
/// all deficits listed. Samples sharing an image never straddle splits.
SplitResult build_splits(const std::vector<Sample>& samples,
                         const SplitPlan& plan, std::uint64_t seed);

}  // namespace uhr
