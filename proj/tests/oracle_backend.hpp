#pragma once

// Ground-truth-answering backend for pipeline tests. It recognizes the
// stage from the prompt opening and replies with the sample's stored
// target, converted into whatever coordinate frame the stage asked for.
// Window prompts are answered from the window metadata line; direct-view
// prompts assume a scaled full view (native or resized), so crop-style
// baselines need scripted fixtures instead.

#include <cmath>
#include <iomanip>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "uhr/backend.hpp"
#include "uhr/dataset.hpp"
#include "uhr/parse.hpp"
#include "uhr/prompts.hpp"
#include "uhr/rle.hpp"

namespace uhrtest {

struct WindowMeta {
    int side = 0;
    int x0 = 0;
    int y0 = 0;
    int image_w = 0;
    int image_h = 0;
};

inline WindowMeta parse_window_meta(const std::string& prompt) {
    static const std::regex re(
        R"(The crop is (\d+) pixels on a side; its top-left corner sits at pixel \[(\d+), (\d+)\] of the (\d+)x(\d+) full image)");
    std::smatch m;
    if (!std::regex_search(prompt, m, re))
        throw std::runtime_error("window metadata missing from prompt");
    return {std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4]),
            std::stoi(m[5])};
}

inline std::pair<int, int> parse_view_dims(const std::string& prompt) {
    static const std::regex re(
        R"(The (?:view|image) is (\d+) pixels wide and (\d+) pixels tall)");
    std::smatch m;
    if (!std::regex_search(prompt, m, re))
        throw std::runtime_error("view dimensions missing from prompt");
    return {std::stoi(m[1]), std::stoi(m[2])};
}

inline std::string fmt_coord(double v) {
    std::ostringstream os;
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        os << static_cast<long long>(v);
    } else {
        os << std::setprecision(10) << v;
    }
    return os.str();
}

class OracleBackend : public uhr::ModelBackend {
public:
    OracleBackend(uhr::Sample sample, uhr::CoordConvention protocol)
        : sample_(std::move(sample)), protocol_(protocol) {
        if (sample_.answer_format == uhr::AnswerFormat::kMask) {
            mask_box_.push_back(uhr::mask_bbox(uhr::rle_decompress(
                sample_.target_mask, sample_.height, sample_.width)));
        }
    }

    std::string complete(const uhr::BackendRequest& request) override {
        switch (uhr::classify_stage(request.prompt)) {
            case uhr::PromptStage::kDiscovery: return discovery_reply();
            case uhr::PromptStage::kInspection: return inspection_reply(request.prompt);
            case uhr::PromptStage::kSynthesis: return "Final answer: " + final_payload();
            case uhr::PromptStage::kDirect: return direct_reply(request.prompt);
            case uhr::PromptStage::kUnknown: break;
        }
        throw uhr::TransportError("oracle cannot classify the prompt");
    }

private:
    const std::vector<uhr::GeomBox>& located_targets() const {
        return sample_.target_boxes.empty() ? mask_box_ : sample_.target_boxes;
    }

    std::string discovery_reply() const {
        std::ostringstream os;
        os << "[";
        bool first = true;
        const auto& targets = located_targets();
        if (targets.empty()) {
            os << "[" << fmt_coord(uhr::axis_from_abs(sample_.width / 2.0, protocol_,
                                                      sample_.width))
               << ", "
               << fmt_coord(uhr::axis_from_abs(sample_.height / 2.0, protocol_,
                                               sample_.height))
               << "]";
        } else {
            for (const uhr::GeomBox& box : targets) {
                const uhr::Point c = uhr::center(box);
                if (!first) os << ", ";
                first = false;
                os << "[" << fmt_coord(uhr::axis_from_abs(c.x, protocol_, sample_.width))
                   << ", "
                   << fmt_coord(uhr::axis_from_abs(c.y, protocol_, sample_.height))
                   << "]";
            }
        }
        os << "]";
        return os.str();
    }

    std::string inspection_reply(const std::string& prompt) const {
        const WindowMeta meta = parse_window_meta(prompt);
        switch (sample_.answer_format) {
            case uhr::AnswerFormat::kCount:
                return std::to_string(sample_.target_count);
            case uhr::AnswerFormat::kOption:
                return std::string(1, sample_.target_option);
            default: break;
        }
        const int valid_w = std::min(meta.side, meta.image_w - meta.x0);
        const int valid_h = std::min(meta.side, meta.image_h - meta.y0);
        std::vector<uhr::GeomBox> local;
        for (const uhr::GeomBox& box : located_targets()) {
            const uhr::Point c = uhr::center(box);
            if (c.x < meta.x0 || c.x > meta.x0 + valid_w || c.y < meta.y0 ||
                c.y > meta.y0 + valid_h) {
                continue;
            }
            uhr::GeomBox lb = box;
            for (size_t i = 0; i + 1 < lb.coords.size(); i += 2) {
                lb.coords[i] =
                    uhr::axis_from_abs(box.coords[i] - meta.x0, protocol_, meta.side);
                lb.coords[i + 1] =
                    uhr::axis_from_abs(box.coords[i + 1] - meta.y0, protocol_, meta.side);
            }
            local.push_back(std::move(lb));
        }
        if (local.empty()) return "null";
        return uhr::render_boxes(local);
    }

    std::string final_payload() const {
        switch (sample_.answer_format) {
            case uhr::AnswerFormat::kCount:
                return std::to_string(sample_.target_count);
            case uhr::AnswerFormat::kOption:
                return std::string(1, sample_.target_option);
            default: break;
        }
        std::vector<uhr::GeomBox> proto_boxes;
        for (const uhr::GeomBox& box : located_targets()) {
            proto_boxes.push_back(uhr::GeomBox{
                box.kind,
                uhr::from_abs(box.coords,
                              uhr::CoordFrame{protocol_, sample_.width, sample_.height})});
        }
        return uhr::render_boxes(proto_boxes);
    }

    std::string direct_reply(const std::string& prompt) const {
        switch (sample_.answer_format) {
            case uhr::AnswerFormat::kCount:
            case uhr::AnswerFormat::kOption:
                return "Final answer: " + final_payload();
            default: break;
        }
        // View assumed to be the full image, possibly scaled.
        const auto [vw, vh] = parse_view_dims(prompt);
        const double sx = static_cast<double>(vw) / sample_.width;
        const double sy = static_cast<double>(vh) / sample_.height;
        std::vector<uhr::GeomBox> proto_boxes;
        for (const uhr::GeomBox& box : located_targets()) {
            uhr::GeomBox vb = box;
            for (size_t i = 0; i + 1 < vb.coords.size(); i += 2) {
                vb.coords[i] = uhr::axis_from_abs(box.coords[i] * sx, protocol_, vw);
                vb.coords[i + 1] = uhr::axis_from_abs(box.coords[i + 1] * sy, protocol_, vh);
            }
            proto_boxes.push_back(std::move(vb));
        }
        return "Final answer: " + uhr::render_boxes(proto_boxes);
    }

    uhr::Sample sample_;
    uhr::CoordConvention protocol_;
    std::vector<uhr::GeomBox> mask_box_;
};

}  // namespace uhrtest
