#pragma once

namespace ppap {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ppap
