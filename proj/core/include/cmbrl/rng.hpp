#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace cmbrl {

// splitmix64 finalizer; used to expand one master seed into independent streams.
std::uint64_t splitmix64(std::uint64_t x);

// Stable 64-bit hash of a label (FNV-1a), used to name derived streams.
std::uint64_t label_hash(std::string_view label);

// derive_seed(s, "a", 3) never collides with derive_seed(s, "b", 3) in practice,
// and adding new labels leaves existing streams untouched.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index = 0);

// Seeded generator whose full state is the engine state. Distributions are
// constructed per call so serialization never has to capture cached values.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  std::size_t index(std::size_t n);       // uniform in [0, n)
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cmbrl
