#pragma once

#include <cstdio>
#include <string>

namespace ppap {

// Shortest text that still round-trips a double through parsing.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace ppap
