#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace vecsac {

/// Invalid configuration: bad dimensions, unknown keys, malformed files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or Inf produced by a computation. Carries the layer index when the
/// fault originates inside a network.
class NumericFault : public std::runtime_error {
 public:
  explicit NumericFault(const std::string& what,
                        std::optional<std::size_t> layer = std::nullopt)
      : std::runtime_error(layer ? what + " (layer " + std::to_string(*layer) + ")"
                                 : what),
        layer_(layer) {}

  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

/// A caller broke an operation's precondition (stale tape, step after done).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace vecsac
