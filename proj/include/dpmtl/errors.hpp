#pragma once

#include <stdexcept>
#include <string>

namespace dpmtl {

// Bad user-supplied configuration: flags, grids, fractions, file paths.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries the 1-based line number when known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  std::size_t line_number;
};

// A dataset failed its invariants; the message lists every violation.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes fed to a primitive.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escaped a numeric kernel, or training diverged.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dpmtl
