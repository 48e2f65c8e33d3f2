#include "smc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace smc::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto e : shape) {
    if (e == 0) fail(ErrorCode::shape_mismatch, "tensor extents must be positive, got " + to_string(shape));
  }
  if (ad::numel(shape) != data.size()) {
    fail(ErrorCode::shape_mismatch, "tensor shape " + to_string(shape) + " holds " +
                                        std::to_string(ad::numel(shape)) + " values, got " +
                                        std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = ad::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= rank()) fail(ErrorCode::shape_mismatch, "axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::shape_mismatch, "item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_->is_leaf) fail(ErrorCode::state, "requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

void zero_grads(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

// ---- Tape ------------------------------------------------------------------

Tape::Tape() : Tape(Options{}) {}
Tape::Tape(Options options) : options_(options) {}

void Tape::note_branches(std::uint64_t digest) { signature_ = (signature_ ^ digest) * 0x100000001b3ULL; }

Tensor Tape::record(std::string_view op, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                    BackwardFn backward) {
  if (consumed_) fail(ErrorCode::state, std::string(op) + ": tape already replayed backward");
  Tensor out(std::move(shape), std::move(values));
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  out.impl().requires_grad = true;
  out.impl().is_leaf = false;
  for (const auto& in : inputs) {
    if (in.is_leaf() && in.requires_grad()) leaves_.push_back(in);
  }
  nodes_.push_back(Node{op, std::move(inputs), out, std::move(backward)});
  return out;
}

void Tape::check_inputs(std::string_view op, std::initializer_list<const Tensor*> inputs) const {
  if (!options_.check_finite) return;
  for (const Tensor* t : inputs) {
    for (double v : t->data()) {
      if (!std::isfinite(v)) fail(ErrorCode::non_finite, std::string(op) + ": non-finite input value");
    }
  }
}

BackwardReport Tape::backward(const Tensor& loss) {
  if (consumed_) fail(ErrorCode::state, "backward: tape already replayed; second backward is not supported");
  if (loss.numel() != 1) fail(ErrorCode::shape_mismatch, "backward: loss must be scalar, got shape " + to_string(loss.shape()));
  consumed_ = true;

  BackwardReport report;
  if (!loss.requires_grad()) {
    report.detached = true;
    for (auto& leaf : leaves_) {
      if (!leaf.has_grad()) leaf.zero_grad();
    }
    nodes_.clear();
    leaves_.clear();
    return report;
  }

  auto& seed = loss.impl();
  if (seed.grad.empty()) seed.grad.assign(1, 0.0);
  seed.grad[0] += 1.0;

  std::vector<std::vector<double>*> grad_in;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    ++report.nodes_visited;
    auto& out = it->output.impl();
    if (out.grad.empty()) continue;  // not on a path to the loss
    grad_in.assign(it->inputs.size(), nullptr);
    for (std::size_t i = 0; i < it->inputs.size(); ++i) {
      auto& in = it->inputs[i].impl();
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad.assign(in.data.size(), 0.0);
      grad_in[i] = &in.grad;
    }
    it->backward(out.data, out.grad, grad_in);
    if (!out.is_leaf && !out.grad.empty() && &out != &seed) {
      // intermediates are dropped below with the nodes; free early
      std::vector<double>().swap(out.grad);
    }
  }
  // Leaves on the tape that are not reachable from the loss still get a
  // defined (zero) gradient.
  for (auto& leaf : leaves_) {
    if (!leaf.has_grad()) leaf.zero_grad();
  }
  nodes_.clear();
  leaves_.clear();
  return report;
}

// ---- helpers ---------------------------------------------------------------

namespace {

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::shape_mismatch,
         std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(std::string_view op, const Tensor& x, std::size_t rank, std::string_view what) {
  if (x.rank() != rank) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": " + std::string(what) + " must have rank " +
                                        std::to_string(rank) + ", got shape " + to_string(x.shape()));
  }
}

// Elementwise unary op; `deriv(x, y)` is dy/dx given input x and output y.
template <class F, class D>
Tensor unary(Tape& tape, std::string_view op, const Tensor& x, F f, D deriv) {
  tape.check_inputs(op, {&x});
  auto xs = x.data();
  std::vector<double> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) y[i] = f(xs[i]);
  return tape.record(op, {x}, x.shape(), std::move(y),
                     [x, deriv](std::span<const double> out, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       auto& dx = *gi[0];
                       auto xv = x.data();
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(xv[i], out[i]);
                     });
}

double logistic(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  tape.check_inputs("add", {&a, &b});
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return tape.record("add", {a, b}, a.shape(), std::move(y),
                     [](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       for (auto* d : gi) {
                         if (!d) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
                       }
                     });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  tape.check_inputs("sub", {&a, &b});
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return tape.record("sub", {a, b}, a.shape(), std::move(y),
                     [](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       if (gi[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                       if (gi[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
                     });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  tape.check_inputs("mul", {&a, &b});
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return tape.record("mul", {a, b}, a.shape(), std::move(y),
                     [a, b](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       if (gi[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * b[i];
                       if (gi[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * a[i];
                     });
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  tape.check_inputs("div", {&a, &b});
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] / b[i];
  return tape.record("div", {a, b}, a.shape(), std::move(y),
                     [b](std::span<const double> out, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       if (gi[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] / b[i];
                       if (gi[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i] * out[i] / b[i];
                     });
}

Tensor add_scalar(Tape& tape, const Tensor& x, double c) {
  return unary(tape, "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias, std::size_t axis) {
  if (axis >= x.rank() || (bias.numel() != x.extent(axis) && bias.numel() != 1)) {
    fail(ErrorCode::shape_mismatch, "add_bias: shape mismatch " + to_string(x.shape()) + " vs bias " +
                                        to_string(bias.shape()) + " on axis " + std::to_string(axis));
  }
  tape.check_inputs("add_bias", {&x, &bias});
  // x viewed as [outer x n x inner]
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.extent(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.extent(a);
  const std::size_t n = x.extent(axis);
  const bool single = bias.numel() == 1 && n != 1;
  auto xv = x.data(), bv = bias.data();
  std::vector<double> y(xv.begin(), xv.end());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < n; ++i) {
      const double b = bv[single ? 0 : i];
      double* row = y.data() + (o * n + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) row[j] += b;
    }
  return tape.record("add_bias", {x, bias}, x.shape(), std::move(y),
                     [outer, n, inner, single](std::span<const double>, std::span<const double> g,
                                               std::span<std::vector<double>*> gi) {
                       if (gi[0])
                         for (std::size_t k = 0; k < g.size(); ++k) (*gi[0])[k] += g[k];
                       if (gi[1]) {
                         auto& db = *gi[1];
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < n; ++i) {
                             const double* row = g.data() + (o * n + i) * inner;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < inner; ++j) acc += row[j];
                             db[single ? 0 : i] += acc;
                           }
                       }
                     });
}

Tensor mul_scalar(Tape& tape, const Tensor& x, double c) {
  return unary(tape, "mul_scalar", x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor square(Tape& tape, const Tensor& x) {
  return unary(tape, "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor reciprocal(Tape& tape, const Tensor& x) {
  return unary(tape, "reciprocal", x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor exp(Tape& tape, const Tensor& x) {
  return unary(tape, "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(Tape& tape, const Tensor& x) {
  if (tape.check_finite()) {
    for (double v : x.data()) {
      if (!(v > 0.0)) fail(ErrorCode::non_finite, "log: input must be positive");
    }
  }
  return unary(tape, "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(tape, "sigmoid", x, logistic, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(tape, "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  if (tape.track_branches()) {
    BranchDigest d;
    for (double v : x.data()) d.add(v > 0.0);
    tape.note_branches(d.value());
  }
  return unary(tape, "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) fail(ErrorCode::invalid_argument, "clamp: lo must not exceed hi");
  if (tape.track_branches()) {
    BranchDigest d;
    for (double v : x.data()) d.add(v <= lo ? 0 : (v >= hi ? 2 : 1));
    tape.note_branches(d.value());
  }
  return unary(tape, "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ---- linear algebra / convolution -----------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2, "lhs");
  require_rank("matmul", b, 2, "rhs");
  const auto m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    fail(ErrorCode::shape_mismatch, "matmul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  tape.check_inputs("matmul", {&a, &b});
  std::vector<double> y(m * n, 0.0);
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = y.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return tape.record(
      "matmul", {a, b}, {m, n}, std::move(y),
      [a, b, m, k, n](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
        auto av = a.data(), bv = b.data();
        if (gi[0]) {
          auto& da = *gi[0];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
              da[i * k + p] += acc;
            }
        }
        if (gi[1]) {
          auto& db = *gi[1];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double s = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) db[p * n + j] += s * g[i * n + j];
            }
        }
      });
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, Conv1dAttrs attrs) {
  require_rank("conv1d", x, 2, "input");
  require_rank("conv1d", kernel, 3, "kernel");
  const auto T = x.extent(0), cin = x.extent(1);
  const auto K = kernel.extent(0), cout = kernel.extent(2);
  if (kernel.extent(1) != cin) {
    fail(ErrorCode::shape_mismatch,
         "conv1d: shape mismatch " + to_string(x.shape()) + " vs kernel " + to_string(kernel.shape()));
  }
  if (attrs.stride == 0) fail(ErrorCode::invalid_argument, "conv1d: stride must be positive");
  const auto padded = T + 2 * attrs.padding;
  if (padded < K) {
    fail(ErrorCode::shape_mismatch, "conv1d: input " + to_string(x.shape()) + " shorter than kernel " +
                                        to_string(kernel.shape()) + " with padding " + std::to_string(attrs.padding));
  }
  tape.check_inputs("conv1d", {&x, &kernel});
  const auto out_t = (padded - K) / attrs.stride + 1;
  const auto stride = attrs.stride;
  const auto pad = static_cast<std::ptrdiff_t>(attrs.padding);
  std::vector<double> y(out_t * cout, 0.0);
  auto xv = x.data(), wv = kernel.data();
  for (std::size_t t = 0; t < out_t; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t * stride + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t c = 0; c < cin; ++c) {
        const double v = xv[static_cast<std::size_t>(src) * cin + c];
        const double* w = wv.data() + (k * cin + c) * cout;
        double* row = y.data() + t * cout;
        for (std::size_t o = 0; o < cout; ++o) row[o] += v * w[o];
      }
    }
  }
  return tape.record(
      "conv1d", {x, kernel}, {out_t, cout}, std::move(y),
      [x, kernel, T, cin, K, cout, out_t, stride, pad](std::span<const double>, std::span<const double> g,
                                                       std::span<std::vector<double>*> gi) {
        auto xv = x.data(), wv = kernel.data();
        for (std::size_t t = 0; t < out_t; ++t) {
          for (std::size_t k = 0; k < K; ++k) {
            const auto src = static_cast<std::ptrdiff_t>(t * stride + k) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            const auto s = static_cast<std::size_t>(src);
            for (std::size_t c = 0; c < cin; ++c) {
              const double* grow = g.data() + t * cout;
              const std::size_t wbase = (k * cin + c) * cout;
              if (gi[0]) {
                double acc = 0.0;
                for (std::size_t o = 0; o < cout; ++o) acc += grow[o] * wv[wbase + o];
                (*gi[0])[s * cin + c] += acc;
              }
              if (gi[1]) {
                const double v = xv[s * cin + c];
                for (std::size_t o = 0; o < cout; ++o) (*gi[1])[wbase + o] += v * grow[o];
              }
            }
          }
        }
      });
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, Conv2dAttrs attrs) {
  require_rank("conv2d", x, 3, "input");
  require_rank("conv2d", kernel, 4, "kernel");
  const auto cin = x.extent(0), H = x.extent(1), W = x.extent(2);
  const auto cout = kernel.extent(0), KH = kernel.extent(2), KW = kernel.extent(3);
  if (kernel.extent(1) != cin) {
    fail(ErrorCode::shape_mismatch,
         "conv2d: shape mismatch " + to_string(x.shape()) + " vs kernel " + to_string(kernel.shape()));
  }
  if (attrs.stride_h == 0 || attrs.stride_w == 0) fail(ErrorCode::invalid_argument, "conv2d: stride must be positive");
  const auto ph = H + 2 * attrs.pad_h, pw = W + 2 * attrs.pad_w;
  if (ph < KH || pw < KW) {
    fail(ErrorCode::shape_mismatch,
         "conv2d: input " + to_string(x.shape()) + " smaller than kernel " + to_string(kernel.shape()));
  }
  tape.check_inputs("conv2d", {&x, &kernel});
  const auto OH = (ph - KH) / attrs.stride_h + 1, OW = (pw - KW) / attrs.stride_w + 1;

  // im2col: patches[k, pix] holds the input value under kernel tap k (c, p, q)
  // for output pixel pix, or 0 in the padding. Both directions then reduce to
  // contiguous row operations.
  const std::size_t K = cin * KH * KW, NPIX = OH * OW;
  constexpr std::size_t kPad = static_cast<std::size_t>(-1);
  std::vector<std::size_t> source(K * NPIX, kPad);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t p = 0; p < KH; ++p)
      for (std::size_t q = 0; q < KW; ++q) {
        const std::size_t k = (c * KH + p) * KW + q;
        for (std::size_t i = 0; i < OH; ++i) {
          const auto r = static_cast<std::ptrdiff_t>(i * attrs.stride_h + p) - static_cast<std::ptrdiff_t>(attrs.pad_h);
          if (r < 0 || r >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t j = 0; j < OW; ++j) {
            const auto s = static_cast<std::ptrdiff_t>(j * attrs.stride_w + q) - static_cast<std::ptrdiff_t>(attrs.pad_w);
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(W)) continue;
            source[k * NPIX + i * OW + j] = (c * H + static_cast<std::size_t>(r)) * W + static_cast<std::size_t>(s);
          }
        }
      }
  auto xv = x.data(), wv = kernel.data();
  std::vector<double> patches(K * NPIX, 0.0);
  for (std::size_t n = 0; n < patches.size(); ++n)
    if (source[n] != kPad) patches[n] = xv[source[n]];

  std::vector<double> y(cout * NPIX, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    double* yrow = y.data() + o * NPIX;
    for (std::size_t k = 0; k < K; ++k) {
      const double w = wv[o * K + k];
      const double* prow = patches.data() + k * NPIX;
      for (std::size_t n = 0; n < NPIX; ++n) yrow[n] += w * prow[n];
    }
  }
  return tape.record("conv2d", {x, kernel}, {cout, OH, OW}, std::move(y),
                     [kernel, source = std::move(source), patches = std::move(patches), cout, K, NPIX](
                         std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       auto wv = kernel.data();
                       if (gi[1]) {
                         auto& dw = *gi[1];
                         for (std::size_t o = 0; o < cout; ++o)
                           for (std::size_t k = 0; k < K; ++k) {
                             const double* grow = g.data() + o * NPIX;
                             const double* prow = patches.data() + k * NPIX;
                             double acc = 0.0;
                             for (std::size_t n = 0; n < NPIX; ++n) acc += grow[n] * prow[n];
                             dw[o * K + k] += acc;
                           }
                       }
                       if (gi[0]) {
                         std::vector<double> dpatch(K * NPIX, 0.0);
                         for (std::size_t o = 0; o < cout; ++o)
                           for (std::size_t k = 0; k < K; ++k) {
                             const double w = wv[o * K + k];
                             const double* grow = g.data() + o * NPIX;
                             double* drow = dpatch.data() + k * NPIX;
                             for (std::size_t n = 0; n < NPIX; ++n) drow[n] += w * grow[n];
                           }
                         auto& dx = *gi[0];
                         for (std::size_t n = 0; n < dpatch.size(); ++n)
                           if (source[n] != kPad) dx[source[n]] += dpatch[n];
                       }
                     });
}

Tensor max_pool2d(Tape& tape, const Tensor& x, std::size_t pool_h, std::size_t pool_w) {
  require_rank("max_pool2d", x, 3, "input");
  if (pool_h == 0 || pool_w == 0) fail(ErrorCode::invalid_argument, "max_pool2d: pool sizes must be positive");
  const auto C = x.extent(0), H = x.extent(1), W = x.extent(2);
  const auto OH = H / pool_h, OW = W / pool_w;
  if (OH == 0 || OW == 0) {
    fail(ErrorCode::shape_mismatch, "max_pool2d: input " + to_string(x.shape()) + " smaller than pool " +
                                        std::to_string(pool_h) + "x" + std::to_string(pool_w));
  }
  tape.check_inputs("max_pool2d", {&x});
  auto xv = x.data();
  std::vector<double> y(C * OH * OW);
  std::vector<std::size_t> arg(C * OH * OW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        std::size_t best = (c * H + i * pool_h) * W + j * pool_w;
        for (std::size_t p = 0; p < pool_h; ++p)
          for (std::size_t q = 0; q < pool_w; ++q) {
            const std::size_t idx = (c * H + i * pool_h + p) * W + j * pool_w + q;
            if (xv[idx] > xv[best]) best = idx;
          }
        const std::size_t o = (c * OH + i) * OW + j;
        y[o] = xv[best];
        arg[o] = best;
      }
  if (tape.track_branches()) {
    BranchDigest d;
    for (auto a : arg) d.add(a);
    tape.note_branches(d.value());
  }
  return tape.record("max_pool2d", {x}, {C, OH, OW}, std::move(y),
                     [arg = std::move(arg)](std::span<const double>, std::span<const double> g,
                                            std::span<std::vector<double>*> gi) {
                       auto& dx = *gi[0];
                       for (std::size_t o = 0; o < g.size(); ++o) dx[arg[o]] += g[o];
                     });
}

// ---- reductions and structure ---------------------------------------------

namespace {

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor reduce_axis(Tape& tape, std::string_view op, const Tensor& x, std::size_t axis, double scale) {
  if (axis >= x.rank()) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                                        to_string(x.shape()));
  }
  tape.check_inputs(op, {&x});
  const auto s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<double> y(s.outer * s.inner, 0.0);
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = xv.data() + (o * s.extent + e) * s.inner;
      double* dst = y.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  if (scale != 1.0)
    for (auto& v : y) v *= scale;
  return tape.record(op, {x}, std::move(out_shape), std::move(y),
                     [s, scale](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       auto& dx = *gi[0];
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t e = 0; e < s.extent; ++e) {
                           double* dst = dx.data() + (o * s.extent + e) * s.inner;
                           const double* src = g.data() + o * s.inner;
                           for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * scale;
                         }
                     });
}

Tensor reduce_all(Tape& tape, std::string_view op, const Tensor& x, double scale) {
  tape.check_inputs(op, {&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return tape.record(op, {x}, {}, {acc * scale},
                     [scale](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       for (auto& d : *gi[0]) d += g[0] * scale;
                     });
}

}  // namespace

Tensor sum(Tape& tape, const Tensor& x, std::size_t axis) { return reduce_axis(tape, "sum", x, axis, 1.0); }

Tensor mean(Tape& tape, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) return reduce_axis(tape, "mean", x, axis, 1.0);  // throws
  return reduce_axis(tape, "mean", x, axis, 1.0 / static_cast<double>(x.extent(axis)));
}

Tensor sum_all(Tape& tape, const Tensor& x) { return reduce_all(tape, "sum_all", x, 1.0); }

Tensor mean_all(Tape& tape, const Tensor& x) {
  return reduce_all(tape, "mean_all", x, 1.0 / static_cast<double>(x.numel()));
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::invalid_argument, "concat: no inputs");
  const auto& first = parts.front().shape();
  if (axis >= first.size()) {
    fail(ErrorCode::shape_mismatch, "concat: axis " + std::to_string(axis) + " out of range for " + to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) fail(ErrorCode::shape_mismatch, "concat: shape mismatch " + to_string(first) + " vs " + to_string(s));
    out_shape[axis] += s[axis];
    tape.check_inputs("concat", {&p});
  }
  const auto outer = split_at(first, axis).outer;
  const auto inner = split_at(first, axis).inner;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.extent(axis) * inner);
  const std::size_t row = out_shape[axis] * inner;

  std::vector<double> y(numel(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto src = parts[k].data().subspan(o * widths[k], widths[k]);
      std::copy(src.begin(), src.end(), y.begin() + static_cast<std::ptrdiff_t>(o * row + offset));
      offset += widths[k];
    }
  }
  return tape.record("concat", parts, std::move(out_shape), std::move(y),
                     [widths, outer, row](std::span<const double>, std::span<const double> g,
                                          std::span<std::vector<double>*> gi) {
                       for (std::size_t o = 0; o < outer; ++o) {
                         std::size_t offset = 0;
                         for (std::size_t k = 0; k < gi.size(); ++k) {
                           if (gi[k]) {
                             double* dst = gi[k]->data() + o * widths[k];
                             const double* src = g.data() + o * row + offset;
                             for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                           }
                           offset += widths[k];
                         }
                       }
                     });
}

Tensor gather(Tape& tape, const Tensor& x, std::vector<std::size_t> index, Shape out_shape) {
  if (numel(out_shape) != index.size()) {
    fail(ErrorCode::shape_mismatch, "gather: output shape " + to_string(out_shape) + " does not match " +
                                        std::to_string(index.size()) + " indices");
  }
  const auto n = x.numel();
  for (auto i : index) {
    if (i >= n) {
      fail(ErrorCode::invalid_argument, "gather: index " + std::to_string(i) + " out of range for " + to_string(x.shape()));
    }
  }
  tape.check_inputs("gather", {&x});
  auto xv = x.data();
  std::vector<double> y(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) y[i] = xv[index[i]];
  return tape.record("gather", {x}, std::move(out_shape), std::move(y),
                     [index = std::move(index)](std::span<const double>, std::span<const double> g,
                                                std::span<std::vector<double>*> gi) {
                       auto& dx = *gi[0];
                       for (std::size_t i = 0; i < index.size(); ++i) dx[index[i]] += g[i];
                     });
}

Tensor broadcast(Tape& tape, const Tensor& x, const Shape& shape) {
  const auto& src = x.shape();
  bool ok = src.size() == shape.size();
  for (std::size_t i = 0; ok && i < src.size(); ++i) ok = src[i] == shape[i] || src[i] == 1;
  if (!ok) fail(ErrorCode::shape_mismatch, "broadcast: shape mismatch " + to_string(src) + " vs " + to_string(shape));
  // source stride per axis, zero where the axis is expanded
  std::vector<std::size_t> stride(src.size(), 0);
  std::size_t acc = 1;
  for (std::size_t i = src.size(); i-- > 0;) {
    stride[i] = src[i] == 1 ? 0 : acc;
    acc *= src[i];
  }
  std::vector<std::size_t> index(numel(shape));
  std::vector<std::size_t> pos(shape.size(), 0);
  for (std::size_t flat = 0; flat < index.size(); ++flat) {
    std::size_t s = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) s += pos[a] * stride[a];
    index[flat] = s;
    for (std::size_t a = shape.size(); a-- > 0;) {
      if (++pos[a] < shape[a]) break;
      pos[a] = 0;
    }
  }
  return gather(tape, x, std::move(index), shape);
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    fail(ErrorCode::shape_mismatch, "reshape: shape mismatch " + to_string(x.shape()) + " vs " + to_string(shape));
  }
  tape.check_inputs("reshape", {&x});
  std::vector<double> y(x.data().begin(), x.data().end());
  return tape.record("reshape", {x}, std::move(shape), std::move(y),
                     [](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                       auto& dx = *gi[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                     });
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_rank("transpose", x, 2, "input");
  const auto r = x.extent(0), c = x.extent(1);
  std::vector<std::size_t> index(r * c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < r; ++j) index[i * r + j] = j * c + i;
  return gather(tape, x, std::move(index), {c, r});
}

}  // namespace smc::ad
