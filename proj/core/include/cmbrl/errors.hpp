#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cmbrl {

// Violated precondition on a public operation (shape, range, flag mismatch).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// env_step called after the last step of an episode.
class EpisodeExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or parameter went non-finite during training.
class TrainingDivergence : public std::runtime_error {
 public:
  explicit TrainingDivergence(const std::string& what, std::int64_t step = -1)
      : std::runtime_error(what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration file. line() is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cmbrl
