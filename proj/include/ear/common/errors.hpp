#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ear {

// Shape or dimension mismatch at an op boundary.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a documented precondition (non-scalar seed, empty mask, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad user-supplied configuration or input value. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The oracle lacks the density or derivative a rule needs.
class UnsupportedOracleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training hit a non-finite loss or gradient. Maps to CLI exit code 2.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, std::int64_t step, std::int64_t epoch,
                 std::int64_t batch)
      : std::runtime_error(what + " (step " + std::to_string(step) + ", epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
        step_(step),
        epoch_(epoch),
        batch_(batch) {}

  std::int64_t step() const noexcept { return step_; }
  std::int64_t epoch() const noexcept { return epoch_; }
  std::int64_t batch() const noexcept { return batch_; }

 private:
  std::int64_t step_;
  std::int64_t epoch_;
  std::int64_t batch_;
};

}  // namespace ear
