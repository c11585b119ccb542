#pragma once

// Bounded FIFO experience memories and mixed real/synthetic batch sampling.

#include <cstddef>
#include <optional>
#include <vector>

#include "cmbrl/envsim.hpp"
#include "cmbrl/rng.hpp"

namespace cmbrl::dyna {

enum class BufferKind : std::uint8_t { kReal = 0, kSynthetic = 1 };

class TransitionBuffer {
 public:
  TransitionBuffer(std::size_t capacity, BufferKind kind);

  // Appends; at capacity the oldest entry is evicted and returned. Throws
  // ContractViolation if the transition's synthetic flag does not match kind.
  std::optional<envsim::Transition> push(const envsim::Transition& t);

  // n distinct entries, uniformly at random. Throws ContractViolation if
  // n > size().
  std::vector<envsim::Transition> sample(std::size_t n, Rng& rng) const;
  // Appends n distinct entries to `out`.
  void sample_into(std::size_t n, Rng& rng, std::vector<envsim::Transition>& out) const;

  // i = 0 is the oldest entry.
  const envsim::Transition& at(std::size_t i) const;
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  BufferKind kind() const { return kind_; }
  bool empty() const { return size_ == 0; }
  void clear();

 private:
  std::size_t capacity_;
  BufferKind kind_;
  std::vector<envsim::Transition> ring_;
  std::size_t head_ = 0;  // index of the oldest entry
  std::size_t size_ = 0;
};

struct BufferSet {
  TransitionBuffer m_alpha{35000, BufferKind::kReal};      // real experience
  TransitionBuffer m_beta{35000, BufferKind::kSynthetic};  // model rollouts
  TransitionBuffer m_gamma{4000, BufferKind::kReal};       // hypernet training

  BufferSet() = default;
  BufferSet(std::size_t real, std::size_t synthetic, std::size_t hypernet)
      : m_alpha(real, BufferKind::kReal),
        m_beta(synthetic, BufferKind::kSynthetic),
        m_gamma(hypernet, BufferKind::kReal) {}
};

// ceil(real_fraction * batch_size) from m_alpha and the rest from m_beta, a
// m_beta shortfall being taken from m_alpha instead. Returns nullopt (skip the
// update) when there is not enough data.
std::optional<std::vector<envsim::Transition>> mixed_batch(const BufferSet& buffers,
                                                           std::size_t batch_size,
                                                           double real_fraction, Rng& rng);

}  // namespace cmbrl::dyna
