#include "cmbrl/buffers.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "cmbrl/errors.hpp"

namespace cmbrl::dyna {

TransitionBuffer::TransitionBuffer(std::size_t capacity, BufferKind kind)
    : capacity_(capacity), kind_(kind) {
  if (capacity == 0) throw ContractViolation("buffer capacity must be >= 1");
}

std::optional<envsim::Transition> TransitionBuffer::push(const envsim::Transition& t) {
  if (t.synthetic != (kind_ == BufferKind::kSynthetic)) {
    throw ContractViolation(t.synthetic ? "synthetic transition pushed to a real buffer"
                                        : "real transition pushed to the synthetic buffer");
  }
  if (size_ < capacity_) {
    if (ring_.size() < capacity_) {
      ring_.push_back(t);
    } else {
      ring_[(head_ + size_) % capacity_] = t;
    }
    ++size_;
    return std::nullopt;
  }
  std::optional<envsim::Transition> evicted = std::move(ring_[head_]);
  ring_[head_] = t;
  head_ = (head_ + 1) % capacity_;
  return evicted;
}

const envsim::Transition& TransitionBuffer::at(std::size_t i) const {
  if (i >= size_) throw ContractViolation("buffer index out of range");
  return ring_[(head_ + i) % capacity_];
}

void TransitionBuffer::clear() {
  ring_.clear();
  head_ = 0;
  size_ = 0;
}

void TransitionBuffer::sample_into(std::size_t n, Rng& rng,
                                   std::vector<envsim::Transition>& out) const {
  if (n > size_) {
    throw ContractViolation("cannot sample " + std::to_string(n) + " from a buffer holding " +
                            std::to_string(size_));
  }
  // Floyd's algorithm: n distinct indices in O(n).
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(n * 2);
  out.reserve(out.size() + n);
  for (std::size_t j = size_ - n; j < size_; ++j) {
    const std::size_t t = rng.index(j + 1);
    const std::size_t pick = chosen.insert(t).second ? t : j;
    if (pick == j) chosen.insert(j);
    out.push_back(at(pick));
  }
}

std::vector<envsim::Transition> TransitionBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<envsim::Transition> out;
  sample_into(n, rng, out);
  return out;
}

std::optional<std::vector<envsim::Transition>> mixed_batch(const BufferSet& buffers,
                                                           std::size_t batch_size,
                                                           double real_fraction, Rng& rng) {
  if (real_fraction < 0.0 || real_fraction > 1.0) {
    throw ContractViolation("real_fraction must lie in [0, 1]");
  }
  const auto want_real =
      static_cast<std::size_t>(std::ceil(real_fraction * static_cast<double>(batch_size)));
  const std::size_t want_synth = batch_size - want_real;
  const std::size_t synth = std::min(want_synth, buffers.m_beta.size());
  const std::size_t real = batch_size - synth;
  if (real > buffers.m_alpha.size()) return std::nullopt;
  std::vector<envsim::Transition> batch;
  batch.reserve(batch_size);
  buffers.m_alpha.sample_into(real, rng, batch);
  buffers.m_beta.sample_into(synth, rng, batch);
  return batch;
}

}  // namespace cmbrl::dyna
