#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/coord.hpp"
#include "uhr/geometry.hpp"
#include "uhr/parse.hpp"

namespace uhr {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One evaluation sample. Exactly the target payload selected by
/// answer_format is meaningful; box targets are absolute pixels on the
/// referenced image.
struct Sample {
    std::string id;
    std::string image_ref;
    int width = 0;
    int height = 0;
    std::string task;
    std::string query;
    std::optional<RectRegion> region;
    AnswerFormat answer_format = AnswerFormat::kCount;
    std::vector<GeomBox> target_boxes;
    std::string target_mask;  // compressed run-length text
    long long target_count = 0;
    char target_option = '\0';
    std::vector<std::string> choices;  // choice texts; index 0 is option A
    std::optional<CoordConvention> coord_protocol;

    bool operator==(const Sample& other) const = default;
};

/// Answer representations the schema allows for a task.
bool task_accepts_format(const std::string& task, AnswerFormat format);

/// Tasks whose query is conditioned on an explicit region rectangle.
bool task_requires_region(const std::string& task);

/// Schema check; message carries the violation. Empty string means valid.
std::string sample_validity_error(const Sample& s);

/// Newline-delimited records; a bad record fails fast with its line number.
std::vector<Sample> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<Sample>& samples);

/// Single-record (de)serialization, exposed for streaming writers.
std::string sample_to_json_line(const Sample& s);
Sample sample_from_json_line(const std::string& line);

}  // namespace uhr
