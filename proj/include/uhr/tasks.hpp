#pragma once

#include <array>
#include <string>

namespace uhr {

/// The 16 task codes in canonical report order.
inline constexpr std::array<const char*, 16> kTaskCodes = {
    "GD",  "RD",  "BG", "CG",  "MCR",           // grounding
    "OC",  "FGR", "RS", "CS",                   // fine-grained understanding
    "GC",  "RC",  "CC", "CRC",                  // counting
    "DrR", "DsR", "PDR",                        // spatial reasoning
};

inline constexpr std::array<const char*, 4> kDimensionNames = {
    "grounding",
    "fine_grained",
    "counting",
    "spatial",
};

bool is_task_code(const std::string& code);

/// Dimension key for a task code; throws std::runtime_error on unknown codes.
std::string task_dimension(const std::string& code);

}  // namespace uhr
