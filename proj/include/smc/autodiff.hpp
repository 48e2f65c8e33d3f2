#pragma once

// Dense double-precision tensors and a reverse-mode gradient tape.
//
// A Tensor is a shared handle: copying it aliases the same storage, which is
// what lets the tape hand gradients back to the caller's leaves. Operations
// are free functions taking the Tape they record onto. An operation is only
// recorded when at least one input requires a gradient, so inference on
// parameters that do not require gradients leaves the tape empty.
//
// Gradients accumulate into leaves; call zero_grad() (or zero_grads()) before
// each backward. A tape can be replayed backward once; a second call throws.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smc/error.hpp"

namespace smc::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is produced
  bool requires_grad = false;
  bool is_leaf = true;
};
}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Direct write access; meant for leaves (optimizer steps, perturbation in
  // gradient checks). Writing into a recorded intermediate invalidates the tape.
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->is_leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  // Fresh leaf holding a copy of the values, no gradient history.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl& impl() const { return *impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

void zero_grads(std::span<Tensor> tensors);

struct BackwardReport {
  // Set when the loss has no path to any tensor requiring a gradient; every
  // leaf the tape has seen then receives an all-zero gradient.
  bool detached = false;
  std::size_t nodes_visited = 0;
};

// Backward rule: receives the forward output, the gradient of the output and
// one gradient buffer per input (null for inputs that do not require a
// gradient). Rules add into the buffers.
using BackwardFn = std::function<void(std::span<const double> out, std::span<const double> grad_out,
                                      std::span<std::vector<double>*> grad_in)>;

class Tape {
 public:
  struct Options {
    bool check_finite = true;
    bool track_branches = true;
  };

  Tape();
  explicit Tape(Options options);

  bool check_finite() const { return options_.check_finite; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Non-smooth operations (relu, clamp, max_pool2d, median selection) fold
  // every branch they take into this signature. Two evaluations with equal
  // signatures went through the same smooth piece of the function.
  bool track_branches() const { return options_.track_branches; }
  std::uint64_t branch_signature() const { return signature_; }
  void note_branches(std::uint64_t digest);

  // Creates the output tensor and records the node when any input requires a
  // gradient. Custom fused operations use this the same way the built-in
  // primitives do.
  Tensor record(std::string_view op, std::vector<Tensor> inputs, Shape shape,
                std::vector<double> values, BackwardFn backward);

  // Throws on a non-finite value when checking is enabled.
  void check_inputs(std::string_view op, std::initializer_list<const Tensor*> inputs) const;

  BackwardReport backward(const Tensor& loss);

 private:
  struct Node {
    std::string_view op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Options options_;
  std::vector<Node> nodes_;
  std::vector<Tensor> leaves_;
  bool consumed_ = false;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

// Incremental digest of branch decisions, folded into a tape at the end.
class BranchDigest {
 public:
  void add(std::uint64_t v) { h_ = (h_ ^ v) * 0x100000001b3ULL; }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// ---- primitives ----------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tape, const Tensor& x, double c);
// out = x + bias indexed along `axis`; bias holds x.extent(axis) values, or a
// single value added everywhere.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias, std::size_t axis);
Tensor mul_scalar(Tape& tape, const Tensor& x, double c);

Tensor square(Tape& tape, const Tensor& x);
Tensor reciprocal(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi);

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

struct Conv1dAttrs {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zeros on both ends; 0 is "valid"
};
// Convolution along time. x [T x Cin], kernel [K x Cin x Cout] -> [T' x Cout]
// with T' = (T + 2*padding - K) / stride + 1. Cross-correlation, no flip.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, Conv1dAttrs attrs = {});

struct Conv2dAttrs {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};
// x [Cin x H x W], kernel [Cout x Cin x KH x KW] -> [Cout x H' x W'].
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, Conv2dAttrs attrs = {});

// Non-overlapping max pooling over the last two axes of [C x H x W]; trailing
// rows/columns that do not fill a window are dropped.
Tensor max_pool2d(Tape& tape, const Tensor& x, std::size_t pool_h, std::size_t pool_w);

// Reductions keep the reduced axis with extent 1.
Tensor sum(Tape& tape, const Tensor& x, std::size_t axis);
Tensor mean(Tape& tape, const Tensor& x, std::size_t axis);
// Full reductions produce a rank-0 tensor.
Tensor sum_all(Tape& tape, const Tensor& x);
Tensor mean_all(Tape& tape, const Tensor& x);

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis);

// out.flat[i] = x.flat[index[i]]; numel(out_shape) must equal index.size().
// The index list is fixed at record time. Covers selection, padding,
// windowing and permutation.
Tensor gather(Tape& tape, const Tensor& x, std::vector<std::size_t> index, Shape out_shape);

// Expands extent-1 axes to the target shape (same rank).
Tensor broadcast(Tape& tape, const Tensor& x, const Shape& shape);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// 2-D transpose built on gather.
Tensor transpose(Tape& tape, const Tensor& x);

}  // namespace smc::ad
