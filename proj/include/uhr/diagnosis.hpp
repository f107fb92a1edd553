#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/geometry.hpp"
#include "uhr/parse.hpp"

namespace uhr {

class DiagnosisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mutually exclusive outcome labels for a grounding prediction, listed in
/// the priority order the classifier applies them:
/// SUCC hit; IF unusable output; RH center outside the queried semantic
/// region; OH overlaps no annotated object; CATH best overlap has the wrong
/// category; CTXH right category but outside the query's referring set;
/// CS the intended target hit too loosely; OTHER residual.
enum class DiagnosisLabel { kSucc, kIf, kRh, kOh, kCath, kCtxh, kCs, kOther };

inline constexpr std::array<DiagnosisLabel, 8> kAllDiagnosisLabels = {
    DiagnosisLabel::kSucc, DiagnosisLabel::kIf,   DiagnosisLabel::kRh,
    DiagnosisLabel::kOh,   DiagnosisLabel::kCath, DiagnosisLabel::kCtxh,
    DiagnosisLabel::kCs,   DiagnosisLabel::kOther,
};

std::string label_name(DiagnosisLabel l);
DiagnosisLabel label_from_name(const std::string& name);

struct AnnotatedObject {
    int id = 0;  // unique within one context
    std::string category;
    GeomBox box;
};

/// Everything the classifier may consult. The ground-truth object must
/// appear in all_objects under gt_object_id. An empty referring set means
/// the query imposed no contextual condition.
struct DiagnosisContext {
    GeomBox gt_box;
    std::string gt_category;
    int gt_object_id = 0;
    std::optional<RectRegion> semantic_region;
    std::vector<AnnotatedObject> all_objects;
    std::set<int> referring_condition_ids;
};

struct DiagnosisOutcome {
    DiagnosisLabel label = DiagnosisLabel::kIf;
    double iou = 0.0;                 // against the ground-truth box
    int best_overlap_object_id = -1;  // -1 when the box touches no object
};

/// Deterministic label assignment; the first matching rule wins. With
/// several predicted boxes the one closest to the ground truth (highest
/// IoU) is judged. Best-overlap ranking: larger intersection area, then
/// larger IoU with that object, then lower id. Throws DiagnosisError when
/// the ground-truth object is missing from the object list.
DiagnosisOutcome diagnose(const ParsedAnswer& prediction,
                          const DiagnosisContext& ctx,
                          double success_iou = 0.3);

inline DiagnosisLabel classify(const ParsedAnswer& prediction,
                               const DiagnosisContext& ctx,
                               double success_iou = 0.3) {
    return diagnose(prediction, ctx, success_iou).label;
}

/// Counts and percentages over all eight labels (absent labels appear with
/// zero). Throws DiagnosisError on an empty input.
struct DiagnosisHistogram {
    std::map<DiagnosisLabel, std::size_t> counts;
    std::map<DiagnosisLabel, double> percentages;
    std::size_t total = 0;
};

DiagnosisHistogram diagnosis_histogram(const std::vector<DiagnosisLabel>& labels);

/// Sample Pearson correlation. Lengths must match and be >= 2; zero
/// variance in either input raises DiagnosisError.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson over fractional ranks; tied values share the average rank.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// 1-based ranks with ties averaged, the Spearman convention.
std::vector<double> fractional_ranks(const std::vector<double>& values);

}  // namespace uhr
