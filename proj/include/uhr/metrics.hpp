#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/geometry.hpp"
#include "uhr/parse.hpp"
#include "uhr/rle.hpp"

namespace uhr {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ParseStatus { kOk, kInvalid, kEmpty };

std::string parse_status_name(ParseStatus s);
ParseStatus parse_status_from_name(const std::string& name);

/// Per-sample scoring outcome. INVALID or EMPTY implies raw_score == 0.
struct ScoreRecord {
    std::string sample_id;
    std::string task;
    double raw_score = 0.0;
    ParseStatus parse_status = ParseStatus::kOk;
    std::map<std::string, double> detail;
};

struct MatchedPair {
    size_t gt_index = 0;
    size_t pred_index = 0;
    double score = 0.0;
};

/// One-to-one greedy pairing outcome; total is the sum of pair scores,
/// fp_count the unmatched predictions, fn_count the unmatched ground truths.
struct MatchResult {
    std::vector<MatchedPair> pairs;
    size_t fp_count = 0;
    size_t fn_count = 0;
    double total = 0.0;
};

/// Continuous localization score blending overlap with center proximity:
/// iou + (1-iou) * exp(-d^2 / sigma^2), where d is the center distance and
/// sigma the diagonal of the ground truth's enclosing horizontal box.
/// Throws on a degenerate ground-truth box.
double s_box(const GeomBox& gt, const GeomBox& pred);

/// Repeatedly pairs the highest-scoring (gt, pred) combination; a pair
/// counts only when its score strictly exceeds validity_floor. Ties break
/// to the lowest gt index, then the lowest pred index.
MatchResult greedy_match(const std::vector<GeomBox>& gts,
                         const std::vector<GeomBox>& preds,
                         double validity_floor = 0.0);

/// 2PR/(P+R) with P = total/(total+fp), R = total/(total+fn);
/// any zero denominator yields 0.
double soft_f1(const MatchResult& m);

/// Mask analog of s_box: mask IoU plus a centroid-proximity term scaled by
/// the ground-truth foreground bounding-box diagonal. Dimension mismatches
/// and empty predictions score 0. Throws on an empty ground truth.
double s_mask(const RleMask& gt, const RleMask& pred);

/// Bounded relative error: max(0, 1 - |pred-c|/c) for c > 0, exact-zero
/// indicator for c == 0. Non-count answers score 0.
double counting_score(long long gt_count, const ParsedAnswer& pred);

/// Exact option accuracy; anything but a matching option letter scores 0.
double option_score(char gt_label, const ParsedAnswer& pred);

/// Highest s_box over the predicted boxes; empty predictions score 0.
double best_box_score(const GeomBox& gt, const std::vector<GeomBox>& preds);

/// Macro aggregation: per-task sample means, dimension means of member
/// tasks, and the overall mean over present tasks. Scores stay in [0,1];
/// display scaling is the caller's concern. Tasks with no records are
/// listed in missing_tasks and excluded from the means.
struct AggregateReport {
    std::map<std::string, double> task_scores;
    std::map<std::string, size_t> task_counts;
    std::map<std::string, double> dimension_scores;
    double overall = 0.0;
    std::vector<std::string> missing_tasks;
};

AggregateReport aggregate(const std::vector<ScoreRecord>& records);

/// Reporting convention: scores scale to 0-100.
inline double display_score(double raw) { return raw * 100.0; }

}  // namespace uhr
