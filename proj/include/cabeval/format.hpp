#pragma once

#include <cstdio>
#include <string>

namespace cabeval {

/// Shortest-safe decimal for round-tripping a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Compact label form, e.g. 0.1 -> "0.1", used in file names.
inline std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace cabeval
