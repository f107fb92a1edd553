#include "uhr/tasks.hpp"

#include <algorithm>
#include <stdexcept>

namespace uhr {

bool is_task_code(const std::string& code) {
    return std::find(kTaskCodes.begin(), kTaskCodes.end(), code) != kTaskCodes.end();
}

std::string task_dimension(const std::string& code) {
    const auto it = std::find(kTaskCodes.begin(), kTaskCodes.end(), code);
    if (it == kTaskCodes.end()) throw std::runtime_error("unknown task code: " + code);
    const auto idx = static_cast<size_t>(it - kTaskCodes.begin());
    if (idx < 5) return kDimensionNames[0];
    if (idx < 9) return kDimensionNames[1];
    if (idx < 13) return kDimensionNames[2];
    return kDimensionNames[3];
}

}  // namespace uhr
