#pragma once

#include <stdexcept>
#include <string>

namespace kmq {

// Invalid configuration or arguments (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data (CLI exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// External scorer failure (CLI exit code 4).
struct ScorerError : std::runtime_error {
  explicit ScorerError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kmq
