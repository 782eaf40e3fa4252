#pragma once

#include <string_view>

namespace ems {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr int kModelFormatVersion = 1;

} // namespace ems
