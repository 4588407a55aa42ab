#pragma once

#include <stdexcept>
#include <string>

namespace pongdqn {

// Invalid configuration value or file.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation was called outside its contract (e.g. stepping a finished game).
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Tensor shape mismatch; message names expected vs. actual.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt, truncated, or incompatible snapshot stream.
struct SnapshotError : std::runtime_error {
  explicit SnapshotError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values surfaced during training; the caller decides abort/skip.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pongdqn
