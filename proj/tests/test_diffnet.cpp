#include <gtest/gtest.h>

#include <cmath>

#include "cmbrl/diffnet.hpp"
#include "cmbrl/errors.hpp"
#include "grad_check.hpp"

namespace cmbrl::diffnet {
namespace {

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

TEST(NetSpec, ParameterLayout) {
  const auto spec = NetSpec::mlp({2, 3, 1}, Activation::kTanh);
  EXPECT_EQ(spec.num_layers(), 2);
  EXPECT_EQ(spec.layer_param_count(0), 2u * 3u + 3u);
  EXPECT_EQ(spec.layer_offset(1), 9u);
  EXPECT_EQ(spec.param_count(), 9u + 3u + 1u);
  EXPECT_EQ(spec.activations.back(), Activation::kIdentity);
}

TEST(NetSpec, RejectsBadShapes) {
  NetSpec spec;
  spec.layer_sizes = {3};
  EXPECT_THROW(spec.validate(), ContractViolation);
  spec.layer_sizes = {3, 0, 1};
  spec.activations = {Activation::kTanh, Activation::kIdentity};
  EXPECT_THROW(spec.validate(), ContractViolation);
  spec.layer_sizes = {3, 2, 1};
  spec.activations = {Activation::kTanh};
  EXPECT_THROW(spec.validate(), ContractViolation);
}

TEST(MlpInit, UniformFanInRangeAndZeroBias) {
  const auto spec = NetSpec::mlp({16, 8, 4}, Activation::kTanh);
  const auto p = mlp_init(spec, 11);
  ASSERT_EQ(p.size(), spec.param_count());
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(1.0 / in);
    const std::size_t off = spec.layer_offset(l);
    for (int i = 0; i < in * out; ++i) EXPECT_LE(std::abs(p[off + i]), bound);
    for (int i = 0; i < out; ++i) EXPECT_EQ(p[off + in * out + i], 0.0);
  }
  EXPECT_EQ(mlp_init(spec, 11), p);
  EXPECT_NE(mlp_init(spec, 12), p);
}

TEST(MlpGradient, HandDifferentiatedScalarCase) {
  const auto spec = NetSpec::mlp({1, 1}, Activation::kIdentity);
  const ParamVector params(std::vector<double>{1.0, 0.0});  // w, b
  Mat x(1, 1);
  x << 1.0;
  Mat t(1, 1);
  t << 0.0;
  const auto r = mlp_gradient(spec, params, x, t);
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  EXPECT_DOUBLE_EQ(r.grads[0], 2.0);
  EXPECT_DOUBLE_EQ(r.grads[1], 2.0);
}

TEST(MlpGradient, ZeroAtExactTargets) {
  Rng rng(5);
  const auto spec = NetSpec::mlp({4, 6, 3}, Activation::kTanh);
  const auto params = mlp_init(spec, 3);
  const Mat x = random_mat(9, 4, rng);
  const Mat y = forward(spec, params.span(), x);
  const auto r = mlp_gradient(spec, params, x, y);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grads.values()) EXPECT_EQ(g, 0.0);
}

TEST(MlpGradient, ShapeMismatchThrows) {
  const auto spec = NetSpec::mlp({2, 3, 1}, Activation::kTanh);
  const auto params = mlp_init(spec, 1);
  EXPECT_THROW(mlp_gradient(spec, params, Mat::Zero(4, 3), Mat::Zero(4, 1)), ContractViolation);
  EXPECT_THROW(mlp_gradient(spec, params, Mat::Zero(4, 2), Mat::Zero(3, 1)), ContractViolation);
  EXPECT_THROW(mlp_gradient(spec, params, Mat::Zero(0, 2), Mat::Zero(0, 1)), ContractViolation);
  EXPECT_THROW(mlp_gradient(spec, ParamVector(3), Mat::Zero(4, 2), Mat::Zero(4, 1)),
               ContractViolation);
}

void expect_matches_finite_differences(const NetSpec& spec, int draws, std::size_t coords) {
  Rng rng(1234);
  for (int d = 0; d < draws; ++d) {
    ParamVector params = mlp_init(spec, 100 + d);
    // Perturb biases away from zero so every parameter is exercised.
    for (auto& v : params.values()) v += 0.1 * rng.normal();
    const Mat x = random_mat(5, spec.input_dim(), rng);
    const Mat t = random_mat(5, spec.output_dim(), rng);
    const auto r = mlp_gradient(spec, params, x, t);
    auto loss = [&] { return mlp_gradient(spec, params, x, t).loss; };
    const auto check = testing::check_gradient(loss, params.span(), r.grads.span(), coords, rng);
    ASSERT_LT(check.max_rel_error, 1e-4) << "draw " << d;
  }
}

TEST(MlpGradient, MatchesFiniteDifferencesSmallTanh) {
  expect_matches_finite_differences(NetSpec::mlp({2, 3, 1}, Activation::kTanh), 100, 1000);
}

TEST(MlpGradient, MatchesFiniteDifferencesReluAndIdentity) {
  expect_matches_finite_differences(NetSpec::mlp({3, 5, 2}, Activation::kRelu), 20, 1000);
  expect_matches_finite_differences(NetSpec::mlp({3, 4, 4, 2}, Activation::kIdentity), 20, 1000);
}

TEST(MlpGradient, MatchesFiniteDifferencesDefaultShapes) {
  expect_matches_finite_differences(NetSpec::mlp({7, 64, 64, 2}, Activation::kTanh), 5, 60);
  expect_matches_finite_differences(NetSpec::mlp({10, 64, 64, 1}, Activation::kTanh), 5, 60);
  expect_matches_finite_differences(NetSpec::mlp({7, 32, 32, 1}, Activation::kTanh), 5, 60);
}

TEST(MlpForward, PureAndMatchesBatchedForward) {
  Rng rng(9);
  const auto spec = NetSpec::mlp({3, 4, 2}, Activation::kTanh);
  const auto params = mlp_init(spec, 2);
  const std::vector<double> x{0.1, -0.4, 0.7};
  const auto a = mlp_forward(spec, params, x);
  const auto b = mlp_forward(spec, params, x);
  EXPECT_EQ(a, b);
  const Mat xm = Eigen::Map<const Mat>(x.data(), 1, 3);
  const Mat y = forward(spec, params.span(), xm);
  EXPECT_EQ(a[0], y(0, 0));
  EXPECT_EQ(a[1], y(0, 1));
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  ParamVector p(std::vector<double>{0.3, -1.0});
  const ParamVector before = p;
  auto state = AdamState::for_size(2);
  adam_step(p, ParamVector(2, 0.0), state, 0.1);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step_count, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // m = 0.1, v = 0.001; bias correction gives m_hat = 1, v_hat = 1.
  ParamVector p(1, 0.0);
  auto state = AdamState::for_size(1);
  adam_step(p, ParamVector(1, 1.0), state, 0.1);
  EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0], -0.1, 1e-8);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  ParamVector p(std::vector<double>{1.0, 2.0, 3.0});
  const ParamVector before = p;
  auto state = AdamState::for_size(3);
  adam_step(p, ParamVector(std::vector<double>{0.5, -2.0, 7.0}), state, 0.0);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step_count, 1);
}

TEST(Adam, SequentialCallsAreDeterministic) {
  const ParamVector g(std::vector<double>{0.2, -0.7});
  ParamVector a(std::vector<double>{1.0, 1.0});
  ParamVector b = a;
  auto sa = AdamState::for_size(2);
  auto sb = AdamState::for_size(2);
  adam_step(a, g, sa, 0.01);
  adam_step(b, g, sb, 0.01);
  EXPECT_EQ(a, b);
  adam_step(a, g, sa, 0.01);
  EXPECT_EQ(sa.step_count, 2);
  EXPECT_EQ(sb.step_count, 1);
  EXPECT_NE(a, b);
}

TEST(Adam, ShapeMismatchThrows) {
  ParamVector p(2);
  auto state = AdamState::for_size(2);
  EXPECT_THROW(adam_step(p, ParamVector(3), state, 0.1), ContractViolation);
}

TEST(SoftUpdate, EndpointsAndInterpolation) {
  ParamVector target(std::vector<double>{0.0, 4.0});
  const ParamVector source(std::vector<double>{2.0, 0.0});
  ParamVector t0 = target;
  soft_update(t0, source, 0.0);
  EXPECT_EQ(t0, target);
  ParamVector t1 = target;
  soft_update(t1, source, 1.0);
  EXPECT_EQ(t1, source);
  ParamVector th = target;
  soft_update(th, source, 0.25);
  EXPECT_DOUBLE_EQ(th[0], 0.5);
  EXPECT_DOUBLE_EQ(th[1], 3.0);
}

TEST(Activation, TanhMatchesStd) {
  Mat z(1, 5);
  z << -20.0, -1.5, 0.0, 0.3, 25.0;
  Mat ref = z;
  apply_activation(Activation::kTanh, z);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(z(0, i), std::tanh(ref(0, i)), 1e-15);
}

}  // namespace
}  // namespace cmbrl::diffnet
