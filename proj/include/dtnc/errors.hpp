#pragma once

#include <stdexcept>
#include <string>

namespace dtnc {

// Malformed input file content (bad JSON/CSV syntax, wrong field types).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally well-formed input that violates a semantic constraint
// (dangling references, zero-length edges, out-of-range values).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (flag values out of range, conflicting options).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dtnc
