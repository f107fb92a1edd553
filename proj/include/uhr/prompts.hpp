#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uhr/coord.hpp"
#include "uhr/dataset.hpp"

namespace uhr {

/// Which pipeline stage a prompt belongs to, recognized by its fixed
/// opening line. Test doubles rely on this to pick canned replies.
enum class PromptStage { kDiscovery, kInspection, kSynthesis, kDirect, kUnknown };

inline constexpr const char* kDiscoveryOpening =
    "You are looking at the complete image.";
inline constexpr const char* kInspectionOpening =
    "You are looking at one square crop taken from a larger image.";
inline constexpr const char* kSynthesisOpening =
    "You are looking at the full image with the examined regions outlined.";
inline constexpr const char* kDirectOpening =
    "You are looking at one image view.";

PromptStage classify_stage(const std::string& prompt);
std::string stage_name(PromptStage s);
PromptStage stage_from_name(const std::string& name);

/// One-sentence statement of the coordinate rules for a view of the given
/// pixel size under the chosen convention.
std::string coordinate_clause(CoordConvention c, int view_w, int view_h);

/// "ABCD..." for the sample's choice list (empty for non-option samples).
std::string option_labels(const Sample& sample);

/// Payload shape the final reply must use, phrased for the model.
std::string format_instructions(const Sample& sample);

/// Rectangle rendered in the convention's coordinates of a view_w x view_h
/// view; rect is given in view pixels.
std::string render_region(const RectRegion& rect, CoordConvention c,
                          int view_w, int view_h);

/// Stage 1: ask for up to max_points evidence-bearing points on the full
/// image, never the task answer.
std::string discovery_prompt(const Sample& sample, CoordConvention protocol,
                             int max_points);

/// Stage 2: crop-local answering with a literal "null" escape. The window
/// origin is stated as metadata; answers stay in crop coordinates.
std::string inspection_prompt(const Sample& sample, const RoiWindow& roi,
                              CoordConvention protocol);

/// Stage 3: full view plus collected findings; the reply must end with a
/// line starting "Final answer:".
std::string synthesis_prompt(const Sample& sample, CoordConvention protocol,
                             const std::vector<std::string>& evidence_lines);

/// Single-call prompt for the baseline strategies. view_region is the task
/// region expressed in view pixels (omit when the view itself is the
/// region); extra_note is appended verbatim after the task line when set.
std::string direct_prompt(const Sample& sample, CoordConvention protocol,
                          int view_w, int view_h,
                          const std::optional<RectRegion>& view_region,
                          const std::string& extra_note = "");

}  // namespace uhr
