#include "uhr/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace uhr {

namespace {

constexpr const char* kFinalMarker = "Final answer:";

struct NumberToken {
    double value = 0.0;
    long long int_value = 0;
    bool is_integer = false;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Grammar: optional sign, digits, optional fractional part. A token may not
// start right after an alphanumeric or '.' so "v1.2" yields only 1.2's parts
// consumed in order and "abc123" yields nothing.
std::vector<NumberToken> scan_numbers(const std::string& s) {
    std::vector<NumberToken> out;
    size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        const bool starts = is_digit(c) || ((c == '+' || c == '-') && i + 1 < s.size() && is_digit(s[i + 1]));
        if (!starts) {
            ++i;
            continue;
        }
        if (i > 0) {
            const char prev = s[i - 1];
            if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '.') {
                ++i;
                while (i < s.size() && (is_digit(s[i]) || s[i] == '.')) ++i;
                continue;
            }
        }
        size_t j = i;
        if (s[j] == '+' || s[j] == '-') ++j;
        const size_t digits_begin = j;
        while (j < s.size() && is_digit(s[j])) ++j;
        bool integer = true;
        if (j < s.size() && s[j] == '.' && j + 1 < s.size() && is_digit(s[j + 1])) {
            integer = false;
            ++j;
            while (j < s.size() && is_digit(s[j])) ++j;
        }
        if (j - digits_begin > 18) {
            // Absurdly long digit strings cannot be coordinates or counts.
            i = j;
            continue;
        }
        NumberToken tok;
        const std::string lit = s.substr(i, j - i);
        tok.value = std::stod(lit);
        tok.is_integer = integer;
        if (integer) tok.int_value = std::stoll(lit);
        out.push_back(tok);
        i = j;
    }
    return out;
}

std::string strip_edges(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// The whole (trimmed) item must be one number, nothing else.
bool parse_full_number(const std::string& item, double& out) {
    const std::string t = strip_edges(item);
    if (t.empty() || t.size() > 24) return false;
    size_t i = 0;
    if (t[i] == '+' || t[i] == '-') ++i;
    const size_t digits_begin = i;
    while (i < t.size() && is_digit(t[i])) ++i;
    if (i == digits_begin || i - digits_begin > 18) return false;
    if (i < t.size() && t[i] == '.') {
        ++i;
        const size_t frac_begin = i;
        while (i < t.size() && is_digit(t[i])) ++i;
        if (i == frac_begin) return false;
    }
    if (i != t.size()) return false;
    out = std::stod(t);
    return true;
}

// Innermost [ ... ] groups whose content is purely comma-separated numbers.
std::vector<std::vector<double>> scan_numeric_groups(const std::string& s) {
    std::vector<std::vector<double>> groups;
    std::vector<size_t> stack;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '[') {
            stack.push_back(i);
        } else if (s[i] == ']' && !stack.empty()) {
            const size_t start = stack.back();
            stack.pop_back();
            const std::string content = s.substr(start + 1, i - start - 1);
            if (content.find('[') != std::string::npos) continue;
            std::vector<double> values;
            bool ok = !content.empty();
            std::istringstream items(content);
            std::string item;
            while (ok && std::getline(items, item, ',')) {
                double value = 0.0;
                if (parse_full_number(item, value)) {
                    values.push_back(value);
                } else {
                    ok = false;
                }
            }
            if (ok && !values.empty()) groups.push_back(std::move(values));
        }
    }
    return groups;
}

}  // namespace

AnswerFormat parse_answer_format(const std::string& name) {
    if (name == "hbb") return AnswerFormat::kBoxHbb;
    if (name == "obb") return AnswerFormat::kBoxObb;
    if (name == "hbb_list") return AnswerFormat::kBoxListHbb;
    if (name == "obb_list") return AnswerFormat::kBoxListObb;
    if (name == "mask") return AnswerFormat::kMask;
    if (name == "count") return AnswerFormat::kCount;
    if (name == "option") return AnswerFormat::kOption;
    throw std::runtime_error("unknown answer format: " + name);
}

std::string answer_format_name(AnswerFormat f) {
    switch (f) {
        case AnswerFormat::kBoxHbb: return "hbb";
        case AnswerFormat::kBoxObb: return "obb";
        case AnswerFormat::kBoxListHbb: return "hbb_list";
        case AnswerFormat::kBoxListObb: return "obb_list";
        case AnswerFormat::kMask: return "mask";
        case AnswerFormat::kCount: return "count";
        case AnswerFormat::kOption: return "option";
    }
    throw std::runtime_error("unknown answer format");
}

bool is_box_format(AnswerFormat f) {
    return f == AnswerFormat::kBoxHbb || f == AnswerFormat::kBoxObb ||
           f == AnswerFormat::kBoxListHbb || f == AnswerFormat::kBoxListObb;
}

bool is_multi_box_format(AnswerFormat f) {
    return f == AnswerFormat::kBoxListHbb || f == AnswerFormat::kBoxListObb;
}

ParsedAnswer ParsedAnswer::make_boxes(std::vector<GeomBox> b) {
    ParsedAnswer a;
    a.kind = AnswerKind::kBoxes;
    a.boxes = std::move(b);
    return a;
}

ParsedAnswer ParsedAnswer::make_count(long long c) {
    ParsedAnswer a;
    a.kind = AnswerKind::kCount;
    a.count = c;
    return a;
}

ParsedAnswer ParsedAnswer::make_option(char o) {
    ParsedAnswer a;
    a.kind = AnswerKind::kOption;
    a.option = o;
    return a;
}

ParsedAnswer ParsedAnswer::make_null() {
    ParsedAnswer a;
    a.kind = AnswerKind::kNull;
    return a;
}

ParsedAnswer ParsedAnswer::invalid(std::string reason) {
    ParsedAnswer a;
    a.kind = AnswerKind::kInvalid;
    a.invalid_reason = std::move(reason);
    return a;
}

std::string extract_final_segment(const std::string& text) {
    size_t best = std::string::npos;
    size_t pos = text.find(kFinalMarker);
    while (pos != std::string::npos) {
        if (pos == 0 || text[pos - 1] == '\n') best = pos;
        pos = text.find(kFinalMarker, pos + 1);
    }
    if (best == std::string::npos) return text;
    return text.substr(best + std::string(kFinalMarker).size());
}

ParsedAnswer parse_boxes(const std::string& text, ExpectedBox expected, bool multi) {
    (void)multi;  // both modes return every valid box; see header
    const std::string seg = extract_final_segment(text);
    const auto groups = scan_numeric_groups(seg);
    bool saw_other_family = false;
    std::vector<GeomBox> boxes;
    for (const auto& g : groups) {
        BoxKind kind;
        if (g.size() == 4) {
            kind = BoxKind::HBB;
            if (expected == ExpectedBox::kObb) {
                saw_other_family = true;
                continue;
            }
        } else if (g.size() == 8) {
            kind = BoxKind::OBB;
            if (expected == ExpectedBox::kHbb) {
                saw_other_family = true;
                continue;
            }
        } else {
            continue;
        }
        GeomBox box{kind, g};
        if (is_valid(box)) boxes.push_back(std::move(box));
    }
    if (boxes.empty()) {
        if (saw_other_family) return ParsedAnswer::invalid("wrong format");
        return ParsedAnswer::invalid("no valid box");
    }
    return ParsedAnswer::make_boxes(std::move(boxes));
}

ParsedAnswer parse_count(const std::string& text) {
    const std::string seg = extract_final_segment(text);
    std::set<long long> distinct;
    for (const NumberToken& tok : scan_numbers(seg)) {
        if (tok.is_integer) distinct.insert(tok.int_value);
    }
    if (distinct.empty()) return ParsedAnswer::invalid("no count");
    if (distinct.size() > 1) return ParsedAnswer::invalid("conflicting numbers");
    const long long value = *distinct.begin();
    if (value < 0) return ParsedAnswer::invalid("negative count");
    return ParsedAnswer::make_count(value);
}

ParsedAnswer parse_option(const std::string& text, const std::string& labels) {
    const std::string seg = extract_final_segment(text);
    std::set<char> matched;
    size_t i = 0;
    while (i < seg.size()) {
        if (!std::isalnum(static_cast<unsigned char>(seg[i]))) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < seg.size() && std::isalnum(static_cast<unsigned char>(seg[j]))) ++j;
        if (j - i == 1 && std::isalpha(static_cast<unsigned char>(seg[i]))) {
            const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(seg[i])));
            if (labels.find(up) != std::string::npos) matched.insert(up);
        }
        i = j;
    }
    if (matched.empty()) return ParsedAnswer::invalid("no option");
    if (matched.size() > 1) return ParsedAnswer::invalid("conflicting options");
    return ParsedAnswer::make_option(*matched.begin());
}

std::vector<Point> parse_points(const std::string& text, size_t max_points) {
    std::vector<Point> out;
    for (const auto& g : scan_numeric_groups(text)) {
        if (g.size() != 2) continue;
        out.push_back({g[0], g[1]});
        if (out.size() >= max_points) break;
    }
    return out;
}

ParsedAnswer parse_local_answer(const std::string& text, AnswerFormat format,
                                const std::string& option_labels) {
    std::string seg = strip_edges(extract_final_segment(text));
    while (!seg.empty() && (seg.back() == '.' || seg.back() == '!' || seg.back() == ',')) {
        seg.pop_back();
    }
    std::string lowered = seg;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lowered == "null") return ParsedAnswer::make_null();
    switch (format) {
        case AnswerFormat::kBoxHbb:
            return parse_boxes(text, ExpectedBox::kHbb, false);
        case AnswerFormat::kBoxObb:
            return parse_boxes(text, ExpectedBox::kObb, false);
        case AnswerFormat::kBoxListHbb:
            return parse_boxes(text, ExpectedBox::kHbb, true);
        case AnswerFormat::kBoxListObb:
            return parse_boxes(text, ExpectedBox::kObb, true);
        case AnswerFormat::kMask:
            return parse_boxes(text, ExpectedBox::kHbb, false);
        case AnswerFormat::kCount:
            return parse_count(text);
        case AnswerFormat::kOption:
            return parse_option(text, option_labels);
    }
    return ParsedAnswer::invalid("unknown answer format");
}

std::string render_box(const GeomBox& box) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < box.coords.size(); ++i) {
        if (i) os << ',';
        const double v = box.coords[i];
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
            os << static_cast<long long>(v);
        } else {
            os << v;
        }
    }
    os << ']';
    return os.str();
}

std::string render_boxes(const std::vector<GeomBox>& boxes) {
    if (boxes.size() == 1) return render_box(boxes[0]);
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < boxes.size(); ++i) {
        if (i) os << ',';
        os << render_box(boxes[i]);
    }
    os << ']';
    return os.str();
}

}  // namespace uhr
