#include "uhr/dataset.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "uhr/rle.hpp"
#include "uhr/tasks.hpp"

namespace uhr {

namespace {

using ordered_json = nlohmann::ordered_json;

bool within_extent(const GeomBox& box, int width, int height) {
    for (size_t i = 0; i < box.coords.size(); i += 2) {
        if (box.coords[i] < 0.0 || box.coords[i] > width) return false;
        if (box.coords[i + 1] < 0.0 || box.coords[i + 1] > height) return false;
    }
    return true;
}

ordered_json box_to_json(const GeomBox& box) {
    ordered_json arr = ordered_json::array();
    for (double v : box.coords) arr.push_back(v);
    return arr;
}

GeomBox box_from_json(const ordered_json& arr, BoxKind kind) {
    if (!arr.is_array()) throw DatasetError("box target must be an array");
    std::vector<double> coords;
    for (const auto& v : arr) {
        if (!v.is_number()) throw DatasetError("box coordinates must be numbers");
        coords.push_back(v.get<double>());
    }
    const size_t want = kind == BoxKind::HBB ? 4 : 8;
    if (coords.size() != want) throw DatasetError("box target has wrong arity");
    return GeomBox{kind, std::move(coords)};
}

}  // namespace

bool task_accepts_format(const std::string& task, AnswerFormat format) {
    if (task == "GD" || task == "RD" || task == "MCR") {
        return format == AnswerFormat::kBoxListHbb || format == AnswerFormat::kBoxListObb;
    }
    if (task == "BG" || task == "CG") {
        return format == AnswerFormat::kBoxHbb || format == AnswerFormat::kBoxObb;
    }
    if (task == "RS" || task == "CS") return format == AnswerFormat::kMask;
    if (task == "GC" || task == "RC" || task == "CC" || task == "CRC") {
        return format == AnswerFormat::kCount;
    }
    if (task == "OC" || task == "FGR" || task == "DrR" || task == "DsR" || task == "PDR") {
        return format == AnswerFormat::kOption;
    }
    return false;
}

bool task_requires_region(const std::string& task) {
    return task == "RD" || task == "RC";
}

std::string sample_validity_error(const Sample& s) {
    if (s.id.empty()) return "empty id";
    if (s.image_ref.empty()) return "empty image reference";
    if (s.width < 1 || s.height < 1) return "non-positive image dimensions";
    if (!is_task_code(s.task)) return "unknown task code: " + s.task;
    if (s.query.empty()) return "empty query";
    if (!task_accepts_format(s.task, s.answer_format)) {
        return "task " + s.task + " does not take answer format " +
               answer_format_name(s.answer_format);
    }
    if (task_requires_region(s.task) && !s.region.has_value()) {
        return "task " + s.task + " needs a region";
    }
    if (s.region.has_value()) {
        const RectRegion& r = *s.region;
        if (!(r.x1 >= 0.0 && r.x1 < r.x2 && r.x2 <= s.width && r.y1 >= 0.0 &&
              r.y1 < r.y2 && r.y2 <= s.height)) {
            return "region outside the image or degenerate";
        }
    }

    const bool box_target = is_box_format(s.answer_format);
    if (!box_target && !s.target_boxes.empty()) return "unexpected box target";
    if (s.answer_format != AnswerFormat::kMask && !s.target_mask.empty()) {
        return "unexpected mask target";
    }
    if (s.answer_format != AnswerFormat::kOption &&
        (s.target_option != '\0' || !s.choices.empty())) {
        return "unexpected option payload";
    }
    if (s.answer_format != AnswerFormat::kCount && s.target_count != 0) {
        return "unexpected count target";
    }

    if (box_target) {
        if (s.target_boxes.empty()) return "missing box target";
        if (!is_multi_box_format(s.answer_format) && s.target_boxes.size() != 1) {
            return "single-target task with several boxes";
        }
        const BoxKind want = (s.answer_format == AnswerFormat::kBoxHbb ||
                              s.answer_format == AnswerFormat::kBoxListHbb)
                                 ? BoxKind::HBB
                                 : BoxKind::OBB;
        for (const GeomBox& box : s.target_boxes) {
            if (box.kind != want) return "box kind does not match answer format";
            const std::string err = box_validity_error(box);
            if (!err.empty()) return "invalid target box: " + err;
            if (!within_extent(box, s.width, s.height)) {
                return "target box outside the image extent";
            }
        }
    } else if (s.answer_format == AnswerFormat::kMask) {
        if (s.target_mask.empty()) return "missing mask target";
        try {
            const RleMask m = rle_decompress(s.target_mask, s.height, s.width);
            if (m.empty_foreground()) return "mask target has no foreground";
        } catch (const MaskError& e) {
            return std::string("bad mask target: ") + e.what();
        }
    } else if (s.answer_format == AnswerFormat::kCount) {
        if (s.target_count < 0) return "negative count target";
    } else if (s.answer_format == AnswerFormat::kOption) {
        if (s.choices.size() < 2 || s.choices.size() > 26) {
            return "option task needs 2 to 26 choices";
        }
        if (s.target_option < 'A' ||
            s.target_option >= static_cast<char>('A' + s.choices.size())) {
            return "target option outside the choice set";
        }
    }
    return "";
}

std::string sample_to_json_line(const Sample& s) {
    ordered_json j;
    j["id"] = s.id;
    j["image"] = s.image_ref;
    j["width"] = s.width;
    j["height"] = s.height;
    j["task"] = s.task;
    j["query"] = s.query;
    if (s.region.has_value()) {
        j["region"] = {s.region->x1, s.region->y1, s.region->x2, s.region->y2};
    }
    j["answer_format"] = answer_format_name(s.answer_format);
    switch (s.answer_format) {
        case AnswerFormat::kBoxHbb:
        case AnswerFormat::kBoxObb:
            j["target"] = box_to_json(s.target_boxes.at(0));
            break;
        case AnswerFormat::kBoxListHbb:
        case AnswerFormat::kBoxListObb: {
            ordered_json arr = ordered_json::array();
            for (const GeomBox& b : s.target_boxes) arr.push_back(box_to_json(b));
            j["target"] = arr;
            break;
        }
        case AnswerFormat::kMask:
            j["target"] = s.target_mask;
            break;
        case AnswerFormat::kCount:
            j["target"] = s.target_count;
            break;
        case AnswerFormat::kOption:
            j["target"] = std::string(1, s.target_option);
            break;
    }
    if (!s.choices.empty()) j["choices"] = s.choices;
    if (s.coord_protocol.has_value()) {
        j["coord_protocol"] = convention_name(*s.coord_protocol);
    }
    return j.dump();
}

Sample sample_from_json_line(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const std::exception& e) {
        throw DatasetError(std::string("not a JSON record: ") + e.what());
    }
    if (!j.is_object()) throw DatasetError("record is not an object");

    Sample s;
    try {
        s.id = j.at("id").get<std::string>();
        s.image_ref = j.at("image").get<std::string>();
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.task = j.at("task").get<std::string>();
        s.query = j.at("query").get<std::string>();
        s.answer_format = parse_answer_format(j.at("answer_format").get<std::string>());
        if (j.contains("region")) {
            const auto& r = j.at("region");
            if (!r.is_array() || r.size() != 4) throw DatasetError("region must be [x1,y1,x2,y2]");
            s.region = RectRegion{r[0].get<double>(), r[1].get<double>(),
                                  r[2].get<double>(), r[3].get<double>()};
        }
        const auto& target = j.at("target");
        switch (s.answer_format) {
            case AnswerFormat::kBoxHbb:
                s.target_boxes.push_back(box_from_json(target, BoxKind::HBB));
                break;
            case AnswerFormat::kBoxObb:
                s.target_boxes.push_back(box_from_json(target, BoxKind::OBB));
                break;
            case AnswerFormat::kBoxListHbb:
            case AnswerFormat::kBoxListObb: {
                if (!target.is_array()) throw DatasetError("multi-box target must be an array");
                const BoxKind kind = s.answer_format == AnswerFormat::kBoxListHbb
                                         ? BoxKind::HBB
                                         : BoxKind::OBB;
                for (const auto& b : target) s.target_boxes.push_back(box_from_json(b, kind));
                break;
            }
            case AnswerFormat::kMask:
                s.target_mask = target.get<std::string>();
                break;
            case AnswerFormat::kCount:
                s.target_count = target.get<long long>();
                break;
            case AnswerFormat::kOption: {
                const std::string o = target.get<std::string>();
                if (o.size() != 1) throw DatasetError("option target must be one letter");
                s.target_option = o[0];
                break;
            }
        }
        if (j.contains("choices")) {
            for (const auto& c : j.at("choices")) s.choices.push_back(c.get<std::string>());
        }
        if (j.contains("coord_protocol")) {
            s.coord_protocol = parse_convention(j.at("coord_protocol").get<std::string>());
        }
    } catch (const DatasetError&) {
        throw;
    } catch (const std::exception& e) {
        throw DatasetError(std::string("malformed record: ") + e.what());
    }

    const std::string err = sample_validity_error(s);
    if (!err.empty()) throw DatasetError(err);
    return s;
}

std::vector<Sample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset: " + path);
    std::vector<Sample> samples;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            samples.push_back(sample_from_json_line(line));
        } catch (const DatasetError& e) {
            throw DatasetError("record " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return samples;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write dataset: " + path);
    for (const Sample& s : samples) {
        const std::string err = sample_validity_error(s);
        if (!err.empty()) throw DatasetError("sample " + s.id + ": " + err);
        out << sample_to_json_line(s) << '\n';
    }
    if (!out) throw DatasetError("write failed: " + path);
}

}  // namespace uhr
