#pragma once

// Dense multilayer perceptrons over flat parameter vectors, with exact
// reverse-mode gradients and an Adam optimizer.
//
// Parameter layout for a NetSpec with layer sizes [n0, n1, ..., nL]: for each
// layer l = 1..L, the weight matrix W_l (n_l rows, n_{l-1} columns, row-major)
// followed by the bias b_l (n_l entries). Layer l computes
//   a_l = act_l(W_l a_{l-1} + b_l).

#include <cstdint>
#include <new>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cmbrl::diffnet {

// Row-major so that a batch is one sample per row and weight slices map
// directly onto the parameter layout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Activation : std::uint8_t { kTanh = 0, kRelu = 1, kIdentity = 2 };

struct NetSpec {
  std::vector<int> layer_sizes;
  std::vector<Activation> activations;  // one per layer boundary

  // Hidden layers share `hidden`, the last layer uses `output`.
  static NetSpec mlp(std::vector<int> layer_sizes, Activation hidden,
                     Activation output = Activation::kIdentity);

  // Throws ContractViolation if the invariants do not hold.
  void validate() const;

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  // Layer index is 0-based over boundaries: layer 0 maps layer_sizes[0] -> [1].
  std::size_t layer_param_count(int layer) const;
  std::size_t layer_offset(int layer) const;
  std::size_t param_count() const;

  bool operator==(const NetSpec&) const = default;
};

// 64-byte aligned allocation. Eigen's vectorized reductions peel a
// different number of leading elements depending on the data address, so
// parameters must sit at a fixed alignment for results to be reproducible
// across processes.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParamVector(std::span<const double> values) : values_(values.begin(), values.end()) {}
  explicit ParamVector(const std::vector<double>& values)
      : values_(values.begin(), values.end()) {}

  std::size_t size() const { return values_.size(); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  AlignedDoubles& values() { return values_; }
  const AlignedDoubles& values() const { return values_; }

  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;

 private:
  AlignedDoubles values_;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n);
  bool operator==(const AdamState&) const = default;
};

// Uniform in +-sqrt(1/fan_in) from a mt19937_64 seeded with `seed`; biases zero.
ParamVector mlp_init(const NetSpec& spec, std::uint64_t seed);

// Single-sample forward pass.
std::vector<double> mlp_forward(const NetSpec& spec, const ParamVector& params,
                                std::span<const double> input);

// Post-activation outputs of every layer, index 0 holding the input batch.
struct Tape {
  std::vector<Mat> activations;
  const Mat& output() const { return activations.back(); }
};

// Batched forward pass over raw parameters. When `tape` is non-null the
// intermediate activations needed by backward() are recorded into it.
Mat forward(const NetSpec& spec, std::span<const double> params, const Mat& inputs,
            Tape* tape = nullptr);

// Reverse pass for a recorded forward. `output_grad` is dLoss/dOutput for the
// whole batch. Parameter gradients are ADDED into `param_grad` (which must be
// sized param_count). Returns dLoss/dInput when `want_input_grad` is set,
// otherwise an empty matrix.
Mat backward(const NetSpec& spec, std::span<const double> params, const Tape& tape,
             const Mat& output_grad, std::span<double> param_grad,
             bool want_input_grad = false);

enum class Loss : std::uint8_t { kMse = 0 };

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grads;
};

// Mean squared error averaged over every output entry of the batch, and its
// exact gradient with respect to `params`.
LossAndGrad mlp_gradient(const NetSpec& spec, const ParamVector& params, const Mat& batch_inputs,
                         const Mat& batch_targets, Loss loss = Loss::kMse);

// One bias-corrected Adam update in place; increments state.step_count.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

inline void adam_step(ParamVector& params, const ParamVector& grads, AdamState& state,
                      double lr) {
  adam_step(params.span(), grads.span(), state, lr);
}

// Polyak averaging: target <- tau * source + (1 - tau) * target.
void soft_update(ParamVector& target, const ParamVector& source, double tau);

// Elementwise activation helpers, exposed for composite losses built elsewhere.
void apply_activation(Activation act, Mat& z);
// Multiplies `grad` in place by act'(.) expressed through the activation output.
void activation_backward(Activation act, const Mat& out, Mat& grad);

}  // namespace cmbrl::diffnet
