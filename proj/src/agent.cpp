#include "uhr/agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "uhr/prompts.hpp"
#include "uhr/rle.hpp"

namespace uhr {

namespace {

std::string fmt_value(double v) {
    std::ostringstream os;
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
        os << static_cast<long long>(v);
    } else {
        os << v;
    }
    return os.str();
}

std::string fmt_point(double x, double y) {
    return "[" + fmt_value(x) + ", " + fmt_value(y) + "]";
}

/// Mapping from a prompt view's protocol coordinates to full-image pixels:
/// protocol -> view pixels -> scale -> offset -> clamp.
struct FrameMap {
    CoordConvention protocol = CoordConvention::kThousandBase;
    int view_w = 0;
    int view_h = 0;
    double scale_x = 1.0;
    double scale_y = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
};

std::optional<GeomBox> map_box(const GeomBox& box, const FrameMap& fm,
                               int image_w, int image_h) {
    GeomBox out = box;
    try {
        for (size_t i = 0; i + 1 < box.coords.size(); i += 2) {
            double x = axis_to_abs(box.coords[i], fm.protocol, fm.view_w);
            double y = axis_to_abs(box.coords[i + 1], fm.protocol, fm.view_h);
            x = x * fm.scale_x + fm.offset_x;
            y = y * fm.scale_y + fm.offset_y;
            out.coords[i] = std::clamp(x, 0.0, static_cast<double>(image_w));
            out.coords[i + 1] = std::clamp(y, 0.0, static_cast<double>(image_h));
        }
    } catch (const CoordError&) {
        return std::nullopt;
    }
    if (!is_valid(out)) return std::nullopt;
    return out;
}

/// Box payloads move to absolute pixels; everything else passes through.
ParsedAnswer answer_to_pixels(const ParsedAnswer& answer, const FrameMap& fm,
                              int image_w, int image_h) {
    if (answer.kind != AnswerKind::kBoxes) return answer;
    std::vector<GeomBox> mapped;
    for (const GeomBox& b : answer.boxes) {
        if (auto m = map_box(b, fm, image_w, image_h)) mapped.push_back(std::move(*m));
    }
    if (mapped.empty())
        return ParsedAnswer::invalid("no box survived coordinate mapping");
    return ParsedAnswer::make_boxes(std::move(mapped));
}

ParsedAnswer parse_final(const std::string& reply, const Sample& sample) {
    return parse_local_answer(reply, sample.answer_format, option_labels(sample));
}

/// Runs the segmenter over the first predicted box of a mask sample. A
/// transport failure empties the prediction; a rejected box invalidates it.
void attach_mask(Prediction& pred, Segmenter& segmenter, const ImageCanvas& image,
                 const Sample& sample) {
    if (sample.answer_format != AnswerFormat::kMask) return;
    if (pred.answer.kind != AnswerKind::kBoxes || pred.answer.boxes.empty()) return;
    const int spent_calls = pred.calls;
    try {
        const std::string rle = segmenter.segment(image, pred.answer.boxes.front());
        pred.mask = rle_decompress(rle, image.height(), image.width());
    } catch (const TransportError& e) {
        pred = Prediction{};
        pred.transport_failed = true;
        pred.error = e.what();
        pred.calls = spent_calls;
    } catch (const MaskError& e) {
        pred.answer = ParsedAnswer::invalid(std::string("segmenter rejected the box: ") +
                                            e.what());
        pred.mask.reset();
    }
}

std::string evidence_payload(const EvidenceItem& item, CoordConvention protocol,
                             int image_w, int image_h) {
    switch (item.local_answer.kind) {
        case AnswerKind::kNull:
            return "target not visible here";
        case AnswerKind::kInvalid:
            return "reply unusable (" + item.local_answer.invalid_reason + ")";
        case AnswerKind::kCount:
            return "count " + std::to_string(item.local_answer.count);
        case AnswerKind::kOption:
            return std::string("option ") + item.local_answer.option;
        case AnswerKind::kBoxes: {
            if (item.remapped.empty()) return "box positions unusable";
            std::vector<GeomBox> proto_boxes;
            for (const GeomBox& b : item.remapped) {
                proto_boxes.push_back(GeomBox{
                    b.kind, from_abs(b.coords, CoordFrame{protocol, image_w, image_h})});
            }
            return (proto_boxes.size() > 1 ? "boxes " : "box ") +
                   render_boxes(proto_boxes);
        }
    }
    return "reply unusable";
}

}  // namespace

RoiPolicyMode parse_roi_policy(const std::string& name) {
    if (name == "task_adaptive") return RoiPolicyMode::kTaskAdaptive;
    if (name == "uniform_1") return RoiPolicyMode::kUniform1;
    if (name == "uniform_2") return RoiPolicyMode::kUniform2;
    if (name == "uniform_4") return RoiPolicyMode::kUniform4;
    throw AgentError("unknown window policy: " + name);
}

std::string roi_policy_name(RoiPolicyMode m) {
    switch (m) {
        case RoiPolicyMode::kTaskAdaptive: return "task_adaptive";
        case RoiPolicyMode::kUniform1: return "uniform_1";
        case RoiPolicyMode::kUniform2: return "uniform_2";
        case RoiPolicyMode::kUniform4: return "uniform_4";
    }
    return "task_adaptive";
}

RoiBudgetPolicy RoiBudgetPolicy::task_adaptive() {
    RoiBudgetPolicy p;
    p.mode = RoiPolicyMode::kTaskAdaptive;
    p.adaptive_budgets = {{"GD", 4}, {"MCR", 4}, {"RS", 2},
                          {"CS", 2}, {"RD", 0},  {"RC", 0}};
    return p;
}

RoiBudgetPolicy RoiBudgetPolicy::uniform(int k) {
    RoiBudgetPolicy p;
    switch (k) {
        case 1: p.mode = RoiPolicyMode::kUniform1; break;
        case 2: p.mode = RoiPolicyMode::kUniform2; break;
        case 4: p.mode = RoiPolicyMode::kUniform4; break;
        default: throw AgentError("uniform window budget must be 1, 2, or 4");
    }
    return p;
}

int RoiBudgetPolicy::budget_for(const std::string& task) const {
    switch (mode) {
        case RoiPolicyMode::kUniform1: return 1;
        case RoiPolicyMode::kUniform2: return 2;
        case RoiPolicyMode::kUniform4: return 4;
        case RoiPolicyMode::kTaskAdaptive: break;
    }
    const auto it = adaptive_budgets.find(task);
    if (it == adaptive_budgets.end()) return 1;
    if (it->second < 0) throw AgentError("negative window budget for task " + task);
    return it->second;
}

CoordConvention effective_protocol(const ModelBackend& backend,
                                   const Sample& sample,
                                   const AgentConfig& config) {
    if (const auto native = backend.convention_override()) return *native;
    if (sample.coord_protocol) return *sample.coord_protocol;
    return config.protocol;
}

DiscoveryResult discover_rois(ModelBackend& backend, const ImageCanvas& image,
                              const Sample& sample, const AgentConfig& config) {
    const int budget = config.policy.budget_for(sample.task);
    DiscoveryResult result;

    if (budget == 0) {
        if (!sample.region)
            throw AgentError("task " + sample.task +
                             " has window budget 0 but the sample carries no region");
        const Point anchor{
            std::clamp((sample.region->x1 + sample.region->x2) / 2.0, 0.0,
                       static_cast<double>(image.width())),
            std::clamp((sample.region->y1 + sample.region->y2) / 2.0, 0.0,
                       static_cast<double>(image.height()))};
        result.rois.push_back(
            make_roi(anchor, config.crop_side, image.width(), image.height()));
        return result;
    }

    const CoordConvention protocol = effective_protocol(backend, sample, config);
    BackendRequest request;
    request.images.push_back(image);
    request.prompt = discovery_prompt(sample, protocol, budget);
    const std::string reply = backend.complete(request);
    result.made_call = true;

    const std::vector<Point> points =
        parse_points(reply, static_cast<size_t>(config.max_discovery_points));
    const CoordFrame frame{protocol, image.width(), image.height()};
    std::vector<RoiWindow> windows;
    for (const Point& p : points) {
        try {
            const std::vector<double> abs_xy = to_abs({p.x, p.y}, frame);
            windows.push_back(make_roi({abs_xy[0], abs_xy[1]}, config.crop_side,
                                       image.width(), image.height()));
        } catch (const CoordError&) {
            // Out-of-range point; ignore it like any other malformed output.
        }
    }
    windows = suppress_overlaps(windows, config.roi_overlap_threshold);
    if (windows.size() > static_cast<size_t>(budget)) windows.resize(budget);

    if (windows.empty()) {
        result.used_fallback = true;
        windows.push_back(make_roi({image.width() / 2.0, image.height() / 2.0},
                                   config.crop_side, image.width(), image.height()));
    }
    result.rois = std::move(windows);
    return result;
}

EvidenceItem inspect_roi(ModelBackend& backend, const ImageCanvas& image,
                         const RoiWindow& roi, const Sample& sample,
                         const AgentConfig& config) {
    const CoordConvention protocol = effective_protocol(backend, sample, config);

    BackendRequest request;
    request.images.push_back(crop(image, roi));
    request.prompt = inspection_prompt(sample, roi, protocol);
    const std::string reply = backend.complete(request);

    EvidenceItem item;
    item.roi = roi;
    item.local_answer =
        parse_local_answer(reply, sample.answer_format, option_labels(sample));
    if (item.local_answer.kind == AnswerKind::kBoxes) {
        for (const GeomBox& local : item.local_answer.boxes) {
            try {
                GeomBox full = local;
                full.coords = roi_local_to_full(roi, local.coords, protocol);
                if (is_valid(full)) item.remapped.push_back(std::move(full));
            } catch (const CoordError&) {
                // Locals outside the crop's range are dropped.
            }
        }
    }

    const double cx = roi.x0 + roi.valid_w / 2.0;
    const double cy = roi.y0 + roi.valid_h / 2.0;
    const std::vector<double> proto_center =
        from_abs({cx, cy}, CoordFrame{protocol, roi.image_w, roi.image_h});
    item.summary = "centered at " + fmt_point(proto_center[0], proto_center[1]) +
                   ": " + evidence_payload(item, protocol, roi.image_w, roi.image_h);
    return item;
}

ParsedAnswer synthesize(ModelBackend& backend, const ImageCanvas& image,
                        const Sample& sample,
                        const std::vector<EvidenceItem>& evidence,
                        const AgentConfig& config) {
    const CoordConvention protocol = effective_protocol(backend, sample, config);

    std::vector<RoiWindow> rois;
    std::vector<std::string> lines;
    for (size_t i = 0; i < evidence.size(); ++i) {
        rois.push_back(evidence[i].roi);
        lines.push_back("region " + std::to_string(i + 1) + ", " +
                        evidence[i].summary);
    }

    BackendRequest request;
    request.images.push_back(draw_roi_outlines(image, rois));
    request.prompt = synthesis_prompt(sample, protocol, lines);
    const std::string reply = backend.complete(request);
    return parse_final(reply, sample);
}

MapOutcome run_map(ModelBackend& backend, Segmenter& segmenter,
                   const ImageCanvas& image, const Sample& sample,
                   const AgentConfig& config) {
    MapOutcome out;
    int calls = 0;
    try {
        const DiscoveryResult disc = discover_rois(backend, image, sample, config);
        if (disc.made_call) ++calls;
        out.used_region_roi = !disc.made_call;
        out.discovery_fallback = disc.used_fallback;

        for (const RoiWindow& roi : disc.rois) {
            out.evidence.push_back(inspect_roi(backend, image, roi, sample, config));
            ++calls;
        }

        ParsedAnswer final_answer =
            synthesize(backend, image, sample, out.evidence, config);
        ++calls;

        const CoordConvention protocol = effective_protocol(backend, sample, config);
        const FrameMap full_frame{protocol, image.width(), image.height(),
                                  1.0, 1.0, 0.0, 0.0};
        Prediction pred;
        pred.answer = answer_to_pixels(final_answer, full_frame, image.width(),
                                       image.height());
        attach_mask(pred, segmenter, image, sample);

        const int expected = (disc.made_call ? 1 : 0) +
                             static_cast<int>(out.evidence.size()) + 1;
        if (calls != expected) throw AgentError("call accounting mismatch");
        pred.calls = calls;
        out.prediction = std::move(pred);
    } catch (const TransportError& e) {
        out.prediction = Prediction{};
        out.prediction.transport_failed = true;
        out.prediction.error = e.what();
        out.prediction.calls = calls;
    }
    return out;
}

Strategy parse_strategy(const std::string& name) {
    if (name == "native") return Strategy::kNative;
    if (name == "resize") return Strategy::kResize;
    if (name == "query_crop") return Strategy::kQueryCrop;
    if (name == "oracle_crop") return Strategy::kOracleCrop;
    if (name == "sliding_window") return Strategy::kSlidingWindow;
    throw AgentError("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kNative: return "native";
        case Strategy::kResize: return "resize";
        case Strategy::kQueryCrop: return "query_crop";
        case Strategy::kOracleCrop: return "oracle_crop";
        case Strategy::kSlidingWindow: return "sliding_window";
    }
    return "native";
}

namespace {

Prediction run_single_view(ModelBackend& backend, Segmenter& segmenter,
                           const ImageCanvas& image, const ImageCanvas& view,
                           const Sample& sample, const FrameMap& fm,
                           const std::optional<RectRegion>& view_region,
                           const std::string& note) {
    Prediction pred;
    try {
        BackendRequest request;
        request.images.push_back(view);
        request.prompt = direct_prompt(sample, fm.protocol, fm.view_w, fm.view_h,
                                       view_region, note);
        const std::string reply = backend.complete(request);
        pred.calls = 1;
        pred.answer = answer_to_pixels(parse_final(reply, sample), fm,
                                       image.width(), image.height());
        attach_mask(pred, segmenter, image, sample);
    } catch (const TransportError& e) {
        pred = Prediction{};
        pred.transport_failed = true;
        pred.error = e.what();
    }
    return pred;
}

Prediction run_sliding_window(ModelBackend& backend, Segmenter& segmenter,
                              const ImageCanvas& image, const Sample& sample,
                              const StrategyConfig& config) {
    const CoordConvention protocol =
        backend.convention_override().value_or(
            sample.coord_protocol.value_or(config.protocol));
    const std::vector<RoiWindow> tiles =
        sliding_tiles(image.width(), image.height(), config.view_side);

    Prediction pred;
    std::vector<GeomBox> boxes;
    long long count_sum = 0;
    std::map<char, int> votes;
    bool any_parsed = false;

    for (const RoiWindow& tile : tiles) {
        BackendRequest request;
        request.images.push_back(crop(image, tile));
        request.prompt = inspection_prompt(sample, tile, protocol);
        std::string reply;
        try {
            reply = backend.complete(request);
        } catch (const TransportError& e) {
            Prediction failed;
            failed.transport_failed = true;
            failed.error = e.what();
            failed.calls = pred.calls;
            return failed;
        }
        ++pred.calls;

        const ParsedAnswer local =
            parse_local_answer(reply, sample.answer_format, option_labels(sample));
        switch (local.kind) {
            case AnswerKind::kBoxes:
                any_parsed = true;
                for (const GeomBox& b : local.boxes) {
                    try {
                        GeomBox full = b;
                        full.coords = roi_local_to_full(tile, b.coords, protocol);
                        if (is_valid(full)) boxes.push_back(std::move(full));
                    } catch (const CoordError&) {
                    }
                }
                break;
            case AnswerKind::kCount:
                any_parsed = true;
                count_sum += local.count;
                break;
            case AnswerKind::kOption:
                any_parsed = true;
                ++votes[local.option];
                break;
            case AnswerKind::kNull:
                any_parsed = true;
                break;
            case AnswerKind::kInvalid:
                break;
        }
    }

    switch (sample.answer_format) {
        case AnswerFormat::kBoxHbb:
        case AnswerFormat::kBoxObb:
        case AnswerFormat::kBoxListHbb:
        case AnswerFormat::kBoxListObb:
        case AnswerFormat::kMask: {
            // Keep-first duplicate suppression across tiles, the box analog
            // of the window overlap rule.
            std::vector<GeomBox> kept;
            for (const GeomBox& b : boxes) {
                bool duplicate = false;
                for (const GeomBox& k : kept) {
                    if (iou(k, b) > 0.5) {
                        duplicate = true;
                        break;
                    }
                }
                if (!duplicate) kept.push_back(b);
            }
            if (kept.empty()) {
                pred.answer = any_parsed
                                  ? ParsedAnswer::make_null()
                                  : ParsedAnswer::invalid("no tile reply parsed");
            } else {
                pred.answer = ParsedAnswer::make_boxes(std::move(kept));
            }
            break;
        }
        case AnswerFormat::kCount:
            if (any_parsed) {
                pred.answer = ParsedAnswer::make_count(count_sum);
            } else {
                pred.answer = ParsedAnswer::invalid("no tile reply parsed");
            }
            break;
        case AnswerFormat::kOption: {
            char best = '\0';
            int best_votes = 0;
            for (const auto& [letter, n] : votes) {
                if (n > best_votes) {  // map order breaks ties to the lowest letter
                    best = letter;
                    best_votes = n;
                }
            }
            pred.answer = best != '\0'
                              ? ParsedAnswer::make_option(best)
                              : ParsedAnswer::invalid("no tile chose an option");
            break;
        }
    }
    attach_mask(pred, segmenter, image, sample);
    return pred;
}

}  // namespace

Prediction run_strategy(ModelBackend& backend, Segmenter& segmenter,
                        const ImageCanvas& image, const Sample& sample,
                        const StrategyConfig& config) {
    const CoordConvention protocol =
        backend.convention_override().value_or(
            sample.coord_protocol.value_or(config.protocol));

    switch (config.strategy) {
        case Strategy::kNative: {
            const FrameMap fm{protocol, image.width(), image.height(),
                              1.0, 1.0, 0.0, 0.0};
            return run_single_view(backend, segmenter, image, image, sample, fm,
                                   sample.region, "");
        }
        case Strategy::kResize: {
            const ImageCanvas view = resize_long_edge(image, config.view_side);
            const double sx = static_cast<double>(image.width()) / view.width();
            const double sy = static_cast<double>(image.height()) / view.height();
            const FrameMap fm{protocol, view.width(), view.height(), sx, sy, 0.0, 0.0};
            std::optional<RectRegion> view_region;
            if (sample.region) {
                view_region = RectRegion{sample.region->x1 / sx, sample.region->y1 / sy,
                                         sample.region->x2 / sx, sample.region->y2 / sy};
            }
            return run_single_view(backend, segmenter, image, view, sample, fm,
                                   view_region, "");
        }
        case Strategy::kQueryCrop: {
            if (!sample.region)
                throw AgentError(
                    "query_crop applies only to tasks with an explicit region");
            const ImageCanvas view = crop_rect(image, *sample.region);
            const double x0 = clamp_index(sample.region->x1, image.width());
            const double y0 = clamp_index(sample.region->y1, image.height());
            const FrameMap fm{protocol, view.width(), view.height(), 1.0, 1.0, x0, y0};
            return run_single_view(
                backend, segmenter, image, view, sample, fm, std::nullopt,
                "This view shows exactly the rectangle the task refers to.");
        }
        case Strategy::kOracleCrop: {
            if (!config.oracle_allowed)
                throw AgentError(
                    "oracle_crop peeks at the target; enable it explicitly");
            std::vector<GeomBox> targets = sample.target_boxes;
            if (targets.empty() && sample.answer_format == AnswerFormat::kMask) {
                targets.push_back(mask_bbox(rle_decompress(
                    sample.target_mask, sample.height, sample.width)));
            }
            if (targets.empty())
                throw AgentError("oracle_crop needs a sample with a localized target");
            const RoiWindow roi = oracle_crop(targets, config.view_side,
                                              image.width(), image.height());
            const ImageCanvas view = crop(image, roi);
            const FrameMap fm{protocol, roi.side, roi.side, 1.0, 1.0,
                              static_cast<double>(roi.x0), static_cast<double>(roi.y0)};
            std::string note;
            if (roi.valid_w < roi.side || roi.valid_h < roi.side)
                note = "Black padding on the right or bottom edge lies outside the image.";
            std::optional<RectRegion> view_region;
            if (sample.region) {
                const RectRegion local{
                    std::max(sample.region->x1 - roi.x0, 0.0),
                    std::max(sample.region->y1 - roi.y0, 0.0),
                    std::min(sample.region->x2 - roi.x0, static_cast<double>(roi.side)),
                    std::min(sample.region->y2 - roi.y0, static_cast<double>(roi.side))};
                if (local.x2 > local.x1 && local.y2 > local.y1) view_region = local;
            }
            return run_single_view(backend, segmenter, image, view, sample, fm,
                                   view_region, note);
        }
        case Strategy::kSlidingWindow:
            return run_sliding_window(backend, segmenter, image, sample, config);
    }
    throw AgentError("unknown strategy");
}

ImageCanvas draw_roi_outlines(const ImageCanvas& image,
                              const std::vector<RoiWindow>& rois) {
    ImageCanvas out;
    image.mat.copyTo(out.mat);
    for (const RoiWindow& roi : rois) {
        cv::rectangle(out.mat, cv::Point(roi.x0, roi.y0),
                      cv::Point(roi.x0 + roi.valid_w - 1, roi.y0 + roi.valid_h - 1),
                      cv::Scalar(0, 200, 255), 3);
    }
    return out;
}

}  // namespace uhr
