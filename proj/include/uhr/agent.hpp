#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/backend.hpp"
#include "uhr/coord.hpp"
#include "uhr/dataset.hpp"
#include "uhr/eval.hpp"
#include "uhr/image.hpp"

namespace uhr {

/// Misuse of the pipeline configuration (wrong strategy for a task, missing
/// gate, bad budget). Distinct from TransportError: configuration mistakes
/// abort, transport problems only void single samples.
class AgentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RoiPolicyMode { kTaskAdaptive, kUniform1, kUniform2, kUniform4 };

/// Accepts "task_adaptive", "uniform_1", "uniform_2", "uniform_4".
RoiPolicyMode parse_roi_policy(const std::string& name);
std::string roi_policy_name(RoiPolicyMode m);

struct RoiBudgetPolicy {
    RoiPolicyMode mode = RoiPolicyMode::kTaskAdaptive;
    std::map<std::string, int> adaptive_budgets;

    /// Default budgets: multi-target grounding 4, segmentation 2,
    /// explicit-region tasks 0 (the region itself becomes the window),
    /// everything else 1.
    static RoiBudgetPolicy task_adaptive();
    static RoiBudgetPolicy uniform(int k);

    /// Candidate-window budget for a task. Zero means skip discovery and
    /// build the window from the sample's region.
    int budget_for(const std::string& task) const;
};

struct AgentConfig {
    int crop_side = 1024;
    CoordConvention protocol = CoordConvention::kThousandBase;
    RoiBudgetPolicy policy = RoiBudgetPolicy::task_adaptive();
    double roi_overlap_threshold = 0.5;
    int max_discovery_points = 16;
};

/// Backend's native convention wins, then a per-sample pin, then the run
/// configuration.
CoordConvention effective_protocol(const ModelBackend& backend,
                                   const Sample& sample,
                                   const AgentConfig& config);

/// One inspected window with its parsed local reply. remapped carries the
/// boxes translated to full-image pixels, present only for box replies.
struct EvidenceItem {
    RoiWindow roi;
    ParsedAnswer local_answer;
    std::vector<GeomBox> remapped;
    std::string summary;
};

struct DiscoveryResult {
    std::vector<RoiWindow> rois;
    bool made_call = false;      // false when the region supplied the window
    bool used_fallback = false;  // unusable reply, image-center window
};

/// Stage 1. Asks for candidate points, converts them to pixel anchors,
/// builds side-S windows, suppresses overlaps, truncates to the budget.
/// Budget 0 takes the window straight from the sample's region without a
/// model call. An unusable reply falls back to one centered window.
DiscoveryResult discover_rois(ModelBackend& backend, const ImageCanvas& image,
                              const Sample& sample, const AgentConfig& config);

/// Stage 2. Crops the window, asks for a crop-local answer, remaps box
/// replies to full-image pixels. Unparsable replies are recorded in the
/// item, not raised.
EvidenceItem inspect_roi(ModelBackend& backend, const ImageCanvas& image,
                         const RoiWindow& roi, const Sample& sample,
                         const AgentConfig& config);

/// Stage 3. One call over the outline-marked full view plus the collected
/// findings; returns the parsed final answer still in protocol coordinates.
ParsedAnswer synthesize(ModelBackend& backend, const ImageCanvas& image,
                        const Sample& sample,
                        const std::vector<EvidenceItem>& evidence,
                        const AgentConfig& config);

struct MapOutcome {
    Prediction prediction;
    std::vector<EvidenceItem> evidence;
    bool used_region_roi = false;
    bool discovery_fallback = false;
};

/// Whole pipeline for one sample. On success prediction.calls equals
/// (discovery call ? 1 : 0) + inspected windows + 1 and the answer is in
/// absolute pixels; segmentation samples carry the segmenter's mask. A
/// transport failure anywhere yields an EMPTY prediction instead.
MapOutcome run_map(ModelBackend& backend, Segmenter& segmenter,
                   const ImageCanvas& image, const Sample& sample,
                   const AgentConfig& config);

enum class Strategy { kNative, kResize, kQueryCrop, kOracleCrop, kSlidingWindow };

/// Accepts "native", "resize", "query_crop", "oracle_crop", "sliding_window".
Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct StrategyConfig {
    Strategy strategy = Strategy::kNative;
    int view_side = 1024;  // resize target, crop side, or tile side
    CoordConvention protocol = CoordConvention::kThousandBase;
    bool oracle_allowed = false;  // explicit gate for the ground-truth crop
};

/// Single-call baselines plus the tiled one. Native sends the full image;
/// resize shrinks the long edge first and maps coordinates back; query_crop
/// sends exactly the task region (explicit-region tasks only); oracle_crop
/// centers the view on the target and must be unlocked deliberately;
/// sliding_window sends every tile and merges programmatically.
Prediction run_strategy(ModelBackend& backend, Segmenter& segmenter,
                        const ImageCanvas& image, const Sample& sample,
                        const StrategyConfig& config);

/// Copy of the image with each window's valid extent outlined (3 px).
ImageCanvas draw_roi_outlines(const ImageCanvas& image,
                              const std::vector<RoiWindow>& rois);

}  // namespace uhr
