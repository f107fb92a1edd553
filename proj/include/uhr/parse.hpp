#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uhr/geometry.hpp"

namespace uhr {

/// Canonical target representation of a sample.
enum class AnswerFormat {
    kBoxHbb,      // single horizontal box
    kBoxObb,      // single oriented box
    kBoxListHbb,  // several horizontal boxes
    kBoxListObb,  // several oriented boxes
    kMask,        // RLE mask target, predicted via a horizontal box prompt
    kCount,       // non-negative integer
    kOption,      // one letter from the sample's choice set
};

/// Accepts "hbb", "obb", "hbb_list", "obb_list", "mask", "count", "option".
AnswerFormat parse_answer_format(const std::string& name);
std::string answer_format_name(AnswerFormat f);

bool is_box_format(AnswerFormat f);
bool is_multi_box_format(AnswerFormat f);

enum class AnswerKind { kBoxes, kCount, kOption, kNull, kInvalid };

/// Result of normalizing free-form model text. Exactly the payload named by
/// kind is meaningful; kInvalid always carries a reason.
struct ParsedAnswer {
    AnswerKind kind = AnswerKind::kInvalid;
    std::vector<GeomBox> boxes;
    long long count = 0;
    char option = '\0';
    std::string invalid_reason;

    static ParsedAnswer make_boxes(std::vector<GeomBox> b);
    static ParsedAnswer make_count(long long c);
    static ParsedAnswer make_option(char o);
    static ParsedAnswer make_null();
    static ParsedAnswer invalid(std::string reason);
};

/// Content after the last line beginning "Final answer:", or the whole text
/// when no such line exists.
std::string extract_final_segment(const std::string& text);

enum class ExpectedBox { kHbb, kObb, kEither };

/// Scans bracketed numeric groups of arity 4 (horizontal) or 8 (oriented),
/// drops degenerate or misordered boxes, and returns every valid box in scan
/// order. Misordered corners are rejected, never auto-swapped. multi only
/// documents intent; both modes return the full valid list so the caller can
/// pick the best-scoring box for single-target tasks.
ParsedAnswer parse_boxes(const std::string& text, ExpectedBox expected, bool multi);

/// Exactly one distinct non-negative integer in the final segment.
/// Repeated identical values are fine; distinct values conflict.
ParsedAnswer parse_count(const std::string& text);

/// Single standalone letter from labels, case-insensitive, decoration
/// stripped. Several distinct labels conflict.
ParsedAnswer parse_option(const std::string& text, const std::string& labels);

/// Bracketed numeric pairs in scan order, capped at max_points.
/// Malformed pairs are dropped; no pairs means an empty list.
std::vector<Point> parse_points(const std::string& text, size_t max_points);

/// Window-local answer: the literal token "null" (any case, trailing
/// punctuation ignored) means target-not-here, anything else dispatches to
/// the parser matching the sample's answer format.
ParsedAnswer parse_local_answer(const std::string& text, AnswerFormat format,
                                const std::string& option_labels = "ABCDEF");

/// "[x1,y1,...]"; integral values render without a decimal point.
std::string render_box(const GeomBox& box);

/// Single box renders bare, several render as a bracketed list.
std::string render_boxes(const std::vector<GeomBox>& boxes);

}  // namespace uhr
