#include "uhr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uhr/tasks.hpp"

namespace uhr {

std::string parse_status_name(ParseStatus s) {
    switch (s) {
        case ParseStatus::kOk: return "OK";
        case ParseStatus::kInvalid: return "INVALID";
        case ParseStatus::kEmpty: return "EMPTY";
    }
    throw MetricsError("unknown parse status");
}

ParseStatus parse_status_from_name(const std::string& name) {
    if (name == "OK") return ParseStatus::kOk;
    if (name == "INVALID") return ParseStatus::kInvalid;
    if (name == "EMPTY") return ParseStatus::kEmpty;
    throw MetricsError("unknown parse status: " + name);
}

double s_box(const GeomBox& gt, const GeomBox& pred) {
    validate(gt);
    validate(pred);
    const double sigma = enclosing_diagonal(gt);
    const double overlap = iou(gt, pred);
    const double d = distance(center(gt), center(pred));
    const double proximity = std::exp(-(d * d) / (sigma * sigma));
    return overlap + (1.0 - overlap) * proximity;
}

MatchResult greedy_match(const std::vector<GeomBox>& gts,
                         const std::vector<GeomBox>& preds,
                         double validity_floor) {
    const size_t ng = gts.size();
    const size_t np = preds.size();
    std::vector<double> score(ng * np, 0.0);
    for (size_t g = 0; g < ng; ++g) {
        for (size_t p = 0; p < np; ++p) {
            score[g * np + p] = s_box(gts[g], preds[p]);
        }
    }
    std::vector<char> gt_used(ng, 0);
    std::vector<char> pred_used(np, 0);
    MatchResult result;
    while (true) {
        double best = -1.0;
        size_t best_g = 0;
        size_t best_p = 0;
        for (size_t g = 0; g < ng; ++g) {
            if (gt_used[g]) continue;
            for (size_t p = 0; p < np; ++p) {
                if (pred_used[p]) continue;
                // Strictly-greater keeps the lowest (g, p) on ties.
                if (score[g * np + p] > best) {
                    best = score[g * np + p];
                    best_g = g;
                    best_p = p;
                }
            }
        }
        if (best <= validity_floor) break;
        gt_used[best_g] = 1;
        pred_used[best_p] = 1;
        result.pairs.push_back({best_g, best_p, best});
        result.total += best;
    }
    for (size_t p = 0; p < np; ++p) {
        if (!pred_used[p]) ++result.fp_count;
    }
    for (size_t g = 0; g < ng; ++g) {
        if (!gt_used[g]) ++result.fn_count;
    }
    return result;
}

double soft_f1(const MatchResult& m) {
    const double t = m.total;
    const double pd = t + static_cast<double>(m.fp_count);
    const double rd = t + static_cast<double>(m.fn_count);
    if (pd <= 0.0 || rd <= 0.0) return 0.0;
    const double p = t / pd;
    const double r = t / rd;
    if (p + r <= 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

double s_mask(const RleMask& gt, const RleMask& pred) {
    if (gt.empty_foreground()) throw MetricsError("ground-truth mask has no foreground");
    if (gt.height != pred.height || gt.width != pred.width) return 0.0;
    if (pred.empty_foreground()) return 0.0;
    const double overlap = mask_iou(gt, pred);
    const double d = distance(mask_centroid(gt), mask_centroid(pred));
    const double sigma = mask_bbox_diagonal(gt);
    const double proximity = std::exp(-(d * d) / (sigma * sigma));
    return overlap + (1.0 - overlap) * proximity;
}

double counting_score(long long gt_count, const ParsedAnswer& pred) {
    if (gt_count < 0) throw MetricsError("ground-truth count must be non-negative");
    if (pred.kind != AnswerKind::kCount) return 0.0;
    if (gt_count == 0) return pred.count == 0 ? 1.0 : 0.0;
    const double rel = std::abs(static_cast<double>(pred.count - gt_count)) /
                       static_cast<double>(gt_count);
    return std::max(0.0, 1.0 - rel);
}

double option_score(char gt_label, const ParsedAnswer& pred) {
    return pred.kind == AnswerKind::kOption && pred.option == gt_label ? 1.0 : 0.0;
}

double best_box_score(const GeomBox& gt, const std::vector<GeomBox>& preds) {
    double best = 0.0;
    for (const GeomBox& p : preds) best = std::max(best, s_box(gt, p));
    return best;
}

AggregateReport aggregate(const std::vector<ScoreRecord>& records) {
    std::map<std::string, double> sums;
    std::map<std::string, size_t> counts;
    for (const ScoreRecord& r : records) {
        if (!is_task_code(r.task)) throw MetricsError("unknown task code: " + r.task);
        if (r.parse_status != ParseStatus::kOk && r.raw_score != 0.0) {
            throw MetricsError("non-OK record must score zero: " + r.sample_id);
        }
        if (r.raw_score < 0.0 || r.raw_score > 1.0) {
            throw MetricsError("raw score outside [0,1]: " + r.sample_id);
        }
        sums[r.task] += r.raw_score;
        counts[r.task] += 1;
    }
    AggregateReport report;
    std::map<std::string, std::vector<double>> by_dimension;
    double task_sum = 0.0;
    size_t task_n = 0;
    for (const char* code : kTaskCodes) {
        const auto it = counts.find(code);
        if (it == counts.end()) {
            report.missing_tasks.push_back(code);
            continue;
        }
        const double mean = sums[code] / static_cast<double>(it->second);
        report.task_scores[code] = mean;
        report.task_counts[code] = it->second;
        by_dimension[task_dimension(code)].push_back(mean);
        task_sum += mean;
        ++task_n;
    }
    for (const auto& [dim, scores] : by_dimension) {
        double s = 0.0;
        for (double v : scores) s += v;
        report.dimension_scores[dim] = s / static_cast<double>(scores.size());
    }
    report.overall = task_n > 0 ? task_sum / static_cast<double>(task_n) : 0.0;
    return report;
}

}  // namespace uhr
