#include "uhr/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uhr {

std::string label_name(DiagnosisLabel l) {
    switch (l) {
        case DiagnosisLabel::kSucc: return "SUCC";
        case DiagnosisLabel::kIf: return "IF";
        case DiagnosisLabel::kRh: return "RH";
        case DiagnosisLabel::kOh: return "OH";
        case DiagnosisLabel::kCath: return "CATH";
        case DiagnosisLabel::kCtxh: return "CTXH";
        case DiagnosisLabel::kCs: return "CS";
        case DiagnosisLabel::kOther: return "OTHER";
    }
    return "OTHER";
}

DiagnosisLabel label_from_name(const std::string& name) {
    for (const DiagnosisLabel l : kAllDiagnosisLabels) {
        if (label_name(l) == name) return l;
    }
    throw DiagnosisError("unknown diagnosis label: " + name);
}

DiagnosisOutcome diagnose(const ParsedAnswer& prediction,
                          const DiagnosisContext& ctx, double success_iou) {
    const bool gt_listed =
        std::any_of(ctx.all_objects.begin(), ctx.all_objects.end(),
                    [&](const AnnotatedObject& o) { return o.id == ctx.gt_object_id; });
    if (!gt_listed)
        throw DiagnosisError("ground-truth object missing from the object list");

    DiagnosisOutcome out;
    if (prediction.kind != AnswerKind::kBoxes || prediction.boxes.empty()) {
        out.label = DiagnosisLabel::kIf;
        return out;
    }

    // Judge the candidate closest to the ground truth.
    const GeomBox* judged = &prediction.boxes.front();
    double best_gt_iou = iou(ctx.gt_box, *judged);
    for (size_t i = 1; i < prediction.boxes.size(); ++i) {
        const double v = iou(ctx.gt_box, prediction.boxes[i]);
        if (v > best_gt_iou) {
            best_gt_iou = v;
            judged = &prediction.boxes[i];
        }
    }
    out.iou = best_gt_iou;

    const AnnotatedObject* best = nullptr;
    double best_area = 0.0;
    double best_obj_iou = 0.0;
    for (const AnnotatedObject& obj : ctx.all_objects) {
        const double area = intersection_area(obj.box, *judged);
        if (area <= 0.0) continue;
        const double obj_iou = iou(obj.box, *judged);
        const bool wins =
            best == nullptr || area > best_area ||
            (area == best_area &&
             (obj_iou > best_obj_iou || (obj_iou == best_obj_iou && obj.id < best->id)));
        if (wins) {
            best = &obj;
            best_area = area;
            best_obj_iou = obj_iou;
        }
    }
    if (best != nullptr) out.best_overlap_object_id = best->id;

    if (best_gt_iou >= success_iou) {
        out.label = DiagnosisLabel::kSucc;
    } else if (ctx.semantic_region &&
               !ctx.semantic_region->contains(center(*judged))) {
        out.label = DiagnosisLabel::kRh;
    } else if (best == nullptr) {
        out.label = DiagnosisLabel::kOh;
    } else if (best->category != ctx.gt_category) {
        out.label = DiagnosisLabel::kCath;
    } else if (!ctx.referring_condition_ids.empty() &&
               ctx.referring_condition_ids.count(best->id) == 0) {
        out.label = DiagnosisLabel::kCtxh;
    } else if (best->id == ctx.gt_object_id && best_gt_iou > 0.0 &&
               best_gt_iou < success_iou) {
        out.label = DiagnosisLabel::kCs;
    } else {
        out.label = DiagnosisLabel::kOther;
    }
    return out;
}

DiagnosisHistogram diagnosis_histogram(const std::vector<DiagnosisLabel>& labels) {
    if (labels.empty()) throw DiagnosisError("histogram needs at least one label");
    DiagnosisHistogram h;
    h.total = labels.size();
    for (const DiagnosisLabel l : kAllDiagnosisLabels) h.counts[l] = 0;
    for (const DiagnosisLabel l : labels) ++h.counts[l];
    for (const DiagnosisLabel l : kAllDiagnosisLabels) {
        h.percentages[l] =
            100.0 * static_cast<double>(h.counts[l]) / static_cast<double>(h.total);
    }
    return h;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DiagnosisError("correlation inputs differ in length");
    const size_t n = x.size();
    if (n < 2) throw DiagnosisError("correlation needs at least two points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DiagnosisError("correlation undefined for a zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> fractional_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share the mean of ranks i+1..j+1.
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DiagnosisError("correlation inputs differ in length");
    return pearson(fractional_ranks(x), fractional_ranks(y));
}

}  // namespace uhr
