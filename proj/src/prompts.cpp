#include "uhr/prompts.hpp"

#include <sstream>
#include <stdexcept>

#include "uhr/parse.hpp"

namespace uhr {

namespace {

bool starts_with(const std::string& text, const char* prefix) {
    return text.rfind(prefix, 0) == 0;
}

std::string options_block(const Sample& sample) {
    if (sample.answer_format != AnswerFormat::kOption || sample.choices.empty())
        return "";
    std::ostringstream out;
    out << "Options:\n";
    for (size_t i = 0; i < sample.choices.size(); ++i)
        out << static_cast<char>('A' + i) << ". " << sample.choices[i] << "\n";
    return out.str();
}

std::string final_line_rule() {
    return "End your reply with one line that starts with: Final answer:\n"
           "Put only the answer payload after \"Final answer:\".\n";
}

}  // namespace

PromptStage classify_stage(const std::string& prompt) {
    if (starts_with(prompt, kDiscoveryOpening)) return PromptStage::kDiscovery;
    if (starts_with(prompt, kInspectionOpening)) return PromptStage::kInspection;
    if (starts_with(prompt, kSynthesisOpening)) return PromptStage::kSynthesis;
    if (starts_with(prompt, kDirectOpening)) return PromptStage::kDirect;
    return PromptStage::kUnknown;
}

std::string stage_name(PromptStage s) {
    switch (s) {
        case PromptStage::kDiscovery: return "discovery";
        case PromptStage::kInspection: return "inspection";
        case PromptStage::kSynthesis: return "synthesis";
        case PromptStage::kDirect: return "direct";
        case PromptStage::kUnknown: return "unknown";
    }
    return "unknown";
}

PromptStage stage_from_name(const std::string& name) {
    for (const PromptStage s :
         {PromptStage::kDiscovery, PromptStage::kInspection, PromptStage::kSynthesis,
          PromptStage::kDirect, PromptStage::kUnknown}) {
        if (stage_name(s) == name) return s;
    }
    throw std::runtime_error("unknown prompt stage: " + name);
}

std::string coordinate_clause(CoordConvention c, int view_w, int view_h) {
    std::ostringstream out;
    switch (c) {
        case CoordConvention::kThousandBase:
            out << "Coordinates in your reply use a 1000-unit frame laid over this "
                   "view: x runs from 0 at the left edge to 1000 at the right edge, "
                   "y from 0 at the top edge to 1000 at the bottom edge, regardless "
                   "of the pixel size.";
            break;
        case CoordConvention::kUnitScale:
            out << "Coordinates in your reply are fractions of this view: x runs "
                   "from 0.0 at the left edge to 1.0 at the right edge, y from 0.0 "
                   "at the top edge to 1.0 at the bottom edge.";
            break;
        case CoordConvention::kAbsPixels:
            out << "Coordinates in your reply are pixels of this view: x runs from "
                   "0 at the left edge to " << view_w << " at the right edge, y from "
                   "0 at the top edge to " << view_h << " at the bottom edge.";
            break;
    }
    return out.str();
}

std::string option_labels(const Sample& sample) {
    std::string labels;
    for (size_t i = 0; i < sample.choices.size(); ++i)
        labels.push_back(static_cast<char>('A' + i));
    return labels;
}

std::string format_instructions(const Sample& sample) {
    switch (sample.answer_format) {
        case AnswerFormat::kBoxHbb:
            return "Answer with exactly one horizontal box [x1, y1, x2, y2] "
                   "where x1 < x2 and y1 < y2.";
        case AnswerFormat::kBoxObb:
            return "Answer with exactly one oriented box given as eight numbers "
                   "[x1, y1, x2, y2, x3, y3, x4, y4] tracing its corners in order.";
        case AnswerFormat::kBoxListHbb:
            return "Answer with one horizontal box [x1, y1, x2, y2] per distinct "
                   "object, written as a list like [[x1, y1, x2, y2], ...]. Report "
                   "each object once.";
        case AnswerFormat::kBoxListObb:
            return "Answer with one eight-number oriented box per distinct object, "
                   "written as a list like [[x1, y1, ..., y4], ...]. Report each "
                   "object once.";
        case AnswerFormat::kMask:
            return "Answer with one tight horizontal box [x1, y1, x2, y2] around "
                   "the target; a cutout model turns that box into the final mask, "
                   "so keep it as tight as possible.";
        case AnswerFormat::kCount:
            return "Answer with a single Arabic numeral and nothing else.";
        case AnswerFormat::kOption:
            return "Answer with the single letter of the correct option and "
                   "nothing else.";
    }
    return "";
}

std::string render_region(const RectRegion& rect, CoordConvention c,
                          int view_w, int view_h) {
    const std::vector<double> converted =
        from_abs({rect.x1, rect.y1, rect.x2, rect.y2},
                 CoordFrame{c, view_w, view_h});
    return render_box(GeomBox{BoxKind::HBB, converted});
}

std::string discovery_prompt(const Sample& sample, CoordConvention protocol,
                             int max_points) {
    std::ostringstream out;
    out << kDiscoveryOpening << "\n"
        << "The image is " << sample.width << " pixels wide and " << sample.height
        << " pixels tall.\n"
        << coordinate_clause(protocol, sample.width, sample.height) << "\n"
        << "Task: " << sample.query << "\n";
    if (sample.region) {
        out << "The task applies to the rectangle "
            << render_region(*sample.region, protocol, sample.width, sample.height)
            << " in these coordinates.\n";
    }
    out << "Do not answer the task yet. Point out up to " << max_points
        << " places whose close-up view would show the evidence the task needs, "
           "favoring small or easily missed targets.\n"
        << "Reply with a JSON-style list of points, for example "
           "[[x, y], [x, y]].\n"
        << "Reply with the points only: no boxes, no masks, no counts, no option "
           "letters, no explanations.\n";
    return out.str();
}

std::string inspection_prompt(const Sample& sample, const RoiWindow& roi,
                              CoordConvention protocol) {
    std::ostringstream out;
    out << kInspectionOpening << "\n"
        << "The crop is " << roi.side << " pixels on a side; its top-left corner "
        << "sits at pixel [" << roi.x0 << ", " << roi.y0 << "] of the "
        << roi.image_w << "x" << roi.image_h << " full image. Black padding on "
        << "the right or bottom edge lies outside the image.\n"
        << coordinate_clause(protocol, roi.side, roi.side) << "\n"
        << "Give crop coordinates only, never full-image coordinates.\n"
        << "Task: " << sample.query << "\n";
    if (sample.region) {
        // The region arrives in full-image pixels; restate it in crop-local
        // coordinates so the model can apply the constraint without seeing
        // the rest of the image.
        const RectRegion local{sample.region->x1 - roi.x0, sample.region->y1 - roi.y0,
                               sample.region->x2 - roi.x0, sample.region->y2 - roi.y0};
        const RectRegion clipped{
            std::max(local.x1, 0.0), std::max(local.y1, 0.0),
            std::min(local.x2, static_cast<double>(roi.side)),
            std::min(local.y2, static_cast<double>(roi.side))};
        if (clipped.x2 > clipped.x1 && clipped.y2 > clipped.y1) {
            out << "Only report targets whose centers fall inside the rectangle "
                << render_region(clipped, protocol, roi.side, roi.side)
                << " of this crop.\n";
        } else {
            out << "The rectangle the task mentions lies outside this crop.\n";
        }
    }
    out << options_block(sample);
    switch (sample.answer_format) {
        case AnswerFormat::kBoxHbb:
            out << "If the target is visible, reply with one horizontal box "
                   "[x1, y1, x2, y2] where x1 < x2 and y1 < y2.\n";
            break;
        case AnswerFormat::kBoxObb:
            out << "If the target is visible, reply with one oriented box given as "
                   "eight numbers [x1, y1, x2, y2, x3, y3, x4, y4] tracing its "
                   "corners in order.\n";
            break;
        case AnswerFormat::kBoxListHbb:
            out << "Reply with one horizontal box [x1, y1, x2, y2] per visible "
                   "target, as a list like [[x1, y1, x2, y2], ...].\n";
            break;
        case AnswerFormat::kBoxListObb:
            out << "Reply with one eight-number oriented box per visible target, "
                   "as a list like [[x1, y1, ..., y4], ...].\n";
            break;
        case AnswerFormat::kMask:
            out << "If the target is visible, reply with one tight horizontal box "
                   "[x1, y1, x2, y2] around it.\n";
            break;
        case AnswerFormat::kCount:
            out << "Reply with how many qualifying targets are visible in this "
                   "crop, as a single Arabic numeral.\n";
            break;
        case AnswerFormat::kOption:
            out << "Reply with the single letter of the option this crop "
                   "supports.\n";
            break;
    }
    out << "Answer only from what is visible in this crop. If the crop does not "
           "show what the task asks about, reply with exactly: null\n";
    return out.str();
}

std::string synthesis_prompt(const Sample& sample, CoordConvention protocol,
                             const std::vector<std::string>& evidence_lines) {
    std::ostringstream out;
    out << kSynthesisOpening << "\n"
        << "The image is " << sample.width << " pixels wide and " << sample.height
        << " pixels tall.\n"
        << coordinate_clause(protocol, sample.width, sample.height) << "\n"
        << "Task: " << sample.query << "\n";
    if (sample.region) {
        out << "The task applies to the rectangle "
            << render_region(*sample.region, protocol, sample.width, sample.height)
            << " in these coordinates.\n";
    }
    out << options_block(sample);
    out << "Close-up findings from the outlined regions, already expressed in the "
           "coordinates described above:\n";
    if (evidence_lines.empty()) {
        out << "- none\n";
    } else {
        for (const std::string& line : evidence_lines) out << "- " << line << "\n";
    }
    out << "Weigh these findings against the full view. Merge findings that "
           "describe the same object, drop duplicates, and do not state anything "
           "the findings or the image cannot support.\n"
        << format_instructions(sample) << "\n"
        << final_line_rule();
    return out.str();
}

std::string direct_prompt(const Sample& sample, CoordConvention protocol,
                          int view_w, int view_h,
                          const std::optional<RectRegion>& view_region,
                          const std::string& extra_note) {
    std::ostringstream out;
    out << kDirectOpening << "\n"
        << "The view is " << view_w << " pixels wide and " << view_h
        << " pixels tall.\n"
        << coordinate_clause(protocol, view_w, view_h) << "\n"
        << "Task: " << sample.query << "\n";
    if (view_region) {
        out << "The task applies to the rectangle "
            << render_region(*view_region, protocol, view_w, view_h)
            << " in these coordinates.\n";
    }
    if (!extra_note.empty()) out << extra_note << "\n";
    out << options_block(sample);
    out << format_instructions(sample) << "\n" << final_line_rule();
    return out.str();
}

}  // namespace uhr
