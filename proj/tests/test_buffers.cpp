#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cmbrl/buffers.hpp"
#include "cmbrl/errors.hpp"

namespace cmbrl::dyna {
namespace {

envsim::Transition sentinel(double value, bool synthetic = false) {
  envsim::Transition t;
  t.reward = value;
  t.synthetic = synthetic;
  return t;
}

TEST(TransitionBuffer, EvictsOldestAtCapacity) {
  TransitionBuffer buf(4000, BufferKind::kReal);
  for (int i = 0; i < 4000; ++i) EXPECT_FALSE(buf.push(sentinel(i)).has_value());
  EXPECT_EQ(buf.size(), 4000u);
  const auto evicted = buf.push(sentinel(4000));
  ASSERT_TRUE(evicted.has_value());
  EXPECT_EQ(evicted->reward, 0.0);
  EXPECT_EQ(buf.size(), 4000u);
  EXPECT_EQ(buf.at(0).reward, 1.0);
  EXPECT_EQ(buf.at(3999).reward, 4000.0);
  for (int i = 0; i < 4000; ++i) buf.push(sentinel(5000 + i));
  EXPECT_EQ(buf.at(0).reward, 5000.0);
  EXPECT_THROW(buf.at(4000), ContractViolation);
}

TEST(TransitionBuffer, SamplesDistinctEntries) {
  TransitionBuffer buf(64, BufferKind::kReal);
  for (int i = 0; i < 50; ++i) buf.push(sentinel(i));
  Rng rng(1);
  const auto all = buf.sample(50, rng);
  std::set<double> seen;
  for (const auto& t : all) seen.insert(t.reward);
  EXPECT_EQ(seen.size(), 50u);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = buf.sample(20, rng);
    std::set<double> u;
    for (const auto& t : s) u.insert(t.reward);
    EXPECT_EQ(u.size(), 20u);
  }
}

TEST(TransitionBuffer, SamplingIsRoughlyUniform) {
  TransitionBuffer buf(10, BufferKind::kReal);
  for (int i = 0; i < 10; ++i) buf.push(sentinel(i));
  Rng rng(2);
  std::vector<int> counts(10, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    for (const auto& t : buf.sample(3, rng)) ++counts[static_cast<int>(t.reward)];
  }
  for (int c : counts) EXPECT_NEAR(c, 6000, 300);
}

TEST(TransitionBuffer, RejectsOversamplingAndWrongKind) {
  TransitionBuffer real(8, BufferKind::kReal);
  TransitionBuffer synth(8, BufferKind::kSynthetic);
  real.push(sentinel(1));
  Rng rng(3);
  EXPECT_THROW(real.sample(2, rng), ContractViolation);
  EXPECT_THROW(real.push(sentinel(1, true)), ContractViolation);
  EXPECT_THROW(synth.push(sentinel(1, false)), ContractViolation);
  EXPECT_NO_THROW(synth.push(sentinel(1, true)));
  EXPECT_THROW(TransitionBuffer(0, BufferKind::kReal), ContractViolation);
  real.clear();
  EXPECT_TRUE(real.empty());
}

TEST(TransitionBuffer, SameSeedSameSample) {
  TransitionBuffer buf(100, BufferKind::kReal);
  for (int i = 0; i < 100; ++i) buf.push(sentinel(i));
  Rng a(4), b(4);
  EXPECT_EQ(buf.sample(30, a), buf.sample(30, b));
}

BufferSet filled(std::size_t real, std::size_t synthetic) {
  BufferSet set(5000, 5000, 100);
  for (std::size_t i = 0; i < real; ++i) set.m_alpha.push(sentinel(1.0));
  for (std::size_t i = 0; i < synthetic; ++i) set.m_beta.push(sentinel(-1.0, true));
  return set;
}

std::size_t count_synthetic(const std::vector<envsim::Transition>& batch) {
  return static_cast<std::size_t>(
      std::count_if(batch.begin(), batch.end(), [](const auto& t) { return t.synthetic; }));
}

TEST(MixedBatch, HalfAndHalf) {
  const auto set = filled(2000, 2000);
  Rng rng(5);
  const auto batch = mixed_batch(set, 1024, 0.5, rng);
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(batch->size(), 1024u);
  EXPECT_EQ(count_synthetic(*batch), 512u);
}

TEST(MixedBatch, AllRealWhenFractionIsOne) {
  const auto set = filled(2000, 2000);
  Rng rng(5);
  const auto batch = mixed_batch(set, 1024, 1.0, rng);
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(count_synthetic(*batch), 0u);
}

TEST(MixedBatch, RealShareRoundsUp) {
  const auto set = filled(2000, 2000);
  Rng rng(5);
  const auto batch = mixed_batch(set, 10, 0.25, rng);
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(count_synthetic(*batch), 7u);
}

TEST(MixedBatch, BackfillsSyntheticShortfallWithReal) {
  const auto set = filled(2000, 100);
  Rng rng(5);
  const auto batch = mixed_batch(set, 1024, 0.5, rng);
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(batch->size(), 1024u);
  EXPECT_EQ(count_synthetic(*batch), 100u);
}

TEST(MixedBatch, SkipsWhenRealDataIsShort) {
  Rng rng(5);
  EXPECT_FALSE(mixed_batch(filled(1000, 0), 1024, 0.5, rng).has_value());
  EXPECT_FALSE(mixed_batch(filled(500, 5000), 1024, 0.5, rng).has_value());
  EXPECT_TRUE(mixed_batch(filled(512, 5000), 1024, 0.5, rng).has_value());
  EXPECT_THROW(mixed_batch(filled(10, 0), 4, 1.5, rng), ContractViolation);
}

}  // namespace
}  // namespace cmbrl::dyna
