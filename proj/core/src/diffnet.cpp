#include "cmbrl/diffnet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "cmbrl/errors.hpp"

namespace cmbrl::diffnet {
namespace {

using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;

void check_params(const NetSpec& spec, std::size_t n, const char* where) {
  if (n != spec.param_count()) {
    throw ContractViolation(std::string(where) + ": parameter count " + std::to_string(n) +
                            " does not match spec (" + std::to_string(spec.param_count()) + ")");
  }
}

}  // namespace

NetSpec NetSpec::mlp(std::vector<int> layer_sizes, Activation hidden, Activation output) {
  NetSpec spec;
  spec.layer_sizes = std::move(layer_sizes);
  const int boundaries = static_cast<int>(spec.layer_sizes.size()) - 1;
  for (int l = 0; l < boundaries; ++l) {
    spec.activations.push_back(l + 1 == boundaries ? output : hidden);
  }
  spec.validate();
  return spec;
}

void NetSpec::validate() const {
  if (layer_sizes.size() < 2) throw ContractViolation("NetSpec: need at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw ContractViolation("NetSpec: layer sizes must be >= 1");
  }
  if (activations.size() != layer_sizes.size() - 1) {
    throw ContractViolation("NetSpec: need one activation per layer boundary");
  }
}

std::size_t NetSpec::layer_param_count(int layer) const {
  const auto in = static_cast<std::size_t>(layer_sizes[layer]);
  const auto out = static_cast<std::size_t>(layer_sizes[layer + 1]);
  return in * out + out;
}

std::size_t NetSpec::layer_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) off += layer_param_count(l);
  return off;
}

std::size_t NetSpec::param_count() const { return layer_offset(num_layers()); }

bool ParamVector::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

AdamState AdamState::for_size(std::size_t n) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  return s;
}

ParamVector mlp_init(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 engine(seed);
  ParamVector params(spec.param_count(), 0.0);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(1.0 / in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    double* w = params.data() + spec.layer_offset(l);
    for (int i = 0; i < in * out; ++i) w[i] = dist(engine);
  }
  return params;
}

void apply_activation(Activation act, Mat& z) {
  switch (act) {
    case Activation::kTanh:
      // exp is vectorized for doubles, std::tanh is not.
      z.array() = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

void activation_backward(Activation act, const Mat& out, Mat& grad) {
  switch (act) {
    case Activation::kTanh:
      grad.array() *= 1.0 - out.array().square();
      break;
    case Activation::kRelu:
      grad.array() *= (out.array() > 0.0).cast<double>();
      break;
    case Activation::kIdentity:
      break;
  }
}

Mat forward(const NetSpec& spec, std::span<const double> params, const Mat& inputs, Tape* tape) {
  check_params(spec, params.size(), "forward");
  if (inputs.cols() != spec.input_dim()) {
    throw ContractViolation("forward: input width " + std::to_string(inputs.cols()) +
                            " != " + std::to_string(spec.input_dim()));
  }
  if (tape != nullptr) {
    tape->activations.clear();
    tape->activations.reserve(spec.num_layers() + 1);
    tape->activations.push_back(inputs);
  }
  Mat current = inputs;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double* p = params.data() + spec.layer_offset(l);
    ConstMatMap w(p, out, in);
    ConstRowMap b(p + static_cast<std::ptrdiff_t>(in) * out, out);
    Mat z(current.rows(), out);
    z.noalias() = current * w.transpose();
    z.rowwise() += b;
    apply_activation(spec.activations[l], z);
    if (tape != nullptr) tape->activations.push_back(z);
    current = std::move(z);
  }
  return current;
}

Mat backward(const NetSpec& spec, std::span<const double> params, const Tape& tape,
             const Mat& output_grad, std::span<double> param_grad, bool want_input_grad) {
  check_params(spec, params.size(), "backward");
  check_params(spec, param_grad.size(), "backward (gradient)");
  if (tape.activations.size() != static_cast<std::size_t>(spec.num_layers() + 1)) {
    throw ContractViolation("backward: tape does not match spec");
  }
  const Mat& out = tape.output();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw ContractViolation("backward: output gradient shape mismatch");
  }
  Mat grad = output_grad;
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[l];
    const int nout = spec.layer_sizes[l + 1];
    activation_backward(spec.activations[l], tape.activations[l + 1], grad);
    const std::size_t off = spec.layer_offset(l);
    const Mat& prev = tape.activations[l];
    MatMap gw(param_grad.data() + off, nout, in);
    RowMap gb(param_grad.data() + off + static_cast<std::size_t>(in) * nout, nout);
    gw.noalias() += grad.transpose() * prev;
    gb += grad.colwise().sum();
    if (l > 0 || want_input_grad) {
      ConstMatMap w(params.data() + off, nout, in);
      Mat next(grad.rows(), in);
      next.noalias() = grad * w;
      grad = std::move(next);
    }
  }
  if (!want_input_grad) return Mat();
  return grad;
}

std::vector<double> mlp_forward(const NetSpec& spec, const ParamVector& params,
                                std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(spec.input_dim())) {
    throw ContractViolation("mlp_forward: input length " + std::to_string(input.size()) +
                            " != " + std::to_string(spec.input_dim()));
  }
  Mat x = ConstMatMap(input.data(), 1, spec.input_dim());
  Mat y = forward(spec, params.span(), x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

LossAndGrad mlp_gradient(const NetSpec& spec, const ParamVector& params, const Mat& batch_inputs,
                         const Mat& batch_targets, Loss /*loss*/) {
  if (batch_inputs.rows() == 0) throw ContractViolation("mlp_gradient: empty batch");
  if (batch_targets.rows() != batch_inputs.rows() || batch_targets.cols() != spec.output_dim()) {
    throw ContractViolation("mlp_gradient: target shape mismatch");
  }
  Tape tape;
  const Mat pred = forward(spec, params.span(), batch_inputs, &tape);
  const Mat diff = pred - batch_targets;
  const double n = static_cast<double>(diff.size());
  LossAndGrad result;
  result.loss = diff.squaredNorm() / n;
  result.grads = ParamVector(spec.param_count(), 0.0);
  const Mat dout = (2.0 / n) * diff;
  backward(spec, params.span(), tape, dout, result.grads.span());
  return result;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ContractViolation("adam_step: shape mismatch");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  using VMap = Eigen::Map<Eigen::ArrayXd>;
  using CVMap = Eigen::Map<const Eigen::ArrayXd>;
  const auto size = static_cast<Eigen::Index>(n);
  VMap p(params.data(), size);
  CVMap g(grads.data(), size);
  VMap m(state.first_moment.data(), size);
  VMap v(state.second_moment.data(), size);
  m = state.beta1 * m + (1.0 - state.beta1) * g;
  v = state.beta2 * v + (1.0 - state.beta2) * g.square();
  if (lr == 0.0) return;
  p -= lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
}

void soft_update(ParamVector& target, const ParamVector& source, double tau) {
  if (target.size() != source.size()) throw ContractViolation("soft_update: shape mismatch");
  if (tau == 0.0) return;
  if (tau == 1.0) {
    target = source;
    return;
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = tau * source[i] + (1.0 - tau) * target[i];
  }
}

}  // namespace cmbrl::diffnet
