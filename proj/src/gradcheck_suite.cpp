#include "smc/gradcheck_suite.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

#include "smc/median.hpp"
#include "smc/smc_block.hpp"

namespace smc {

namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

class PointSource {
 public:
  explicit PointSource(std::uint64_t seed) : rng_(seed) {}

  // Distinct values in [lo, hi] on a jittered grid: neighbours are at least
  // 0.6 * (hi - lo) / n apart and none sits within 0.3 * (hi - lo) / n of a
  // grid boundary lo + k (hi - lo) / n.
  Tensor spaced(Shape shape, double lo, double hi, bool requires_grad = true) {
    const std::size_t n = ad::numel(shape);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng_);
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = lo + (hi - lo) * (static_cast<double>(perm[i]) + 0.5 + jitter(rng_)) / static_cast<double>(n);
    }
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  Tensor normal(Shape shape, double scale = 1.0, bool requires_grad = true) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = dist(rng_);
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  Tensor binary(Shape shape) {
    std::bernoulli_distribution coin(0.5);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = coin(rng_) ? 1.0 : 0.0;
    return Tensor(std::move(shape), std::move(v));
  }

  std::uint64_t next() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

// Projects an output onto fixed random weights so every element matters.
Tensor project(Tape& tape, const Tensor& out, const Tensor& weights) {
  return ad::sum_all(tape, ad::mul(tape, out, weights));
}

struct Case {
  std::string name;
  // Builds the function and its leaves for one random point.
  std::function<std::pair<ad::ScalarFn, std::vector<Tensor>>(PointSource&)> make;
  std::optional<std::size_t> coords_per_leaf;
};

template <typename Op>
Shape op_shape_probe(Op op, const Tensor& x) {
  Tape tape;
  return op(tape, x.detach()).shape();
}

template <typename Op>
Case unary(std::string name, Shape shape, double lo, double hi, Op op) {
  return {std::move(name), [shape, lo, hi, op](PointSource& src) {
            auto x = src.spaced(shape, lo, hi);
            auto probe = op_shape_probe(op, x);
            auto w = src.normal(probe, 1.0, false);
            ad::ScalarFn f = [x, w, op](Tape& tape) { return project(tape, op(tape, x), w); };
            return std::make_pair(f, std::vector<Tensor>{x});
          },
          std::nullopt};
}

template <typename Op>
Case binary_op(std::string name, Shape sa, Shape sb, double lo_b, double hi_b, Op op) {
  return {std::move(name), [sa, sb, lo_b, hi_b, op](PointSource& src) {
            auto a = src.spaced(sa, -2.0, 2.0);
            auto b = src.spaced(sb, lo_b, hi_b);
            Tape probe_tape;
            auto w = src.normal(op(probe_tape, a.detach(), b.detach()).shape(), 1.0, false);
            ad::ScalarFn f = [a, b, w, op](Tape& tape) { return project(tape, op(tape, a, b), w); };
            return std::make_pair(f, std::vector<Tensor>{a, b});
          },
          std::nullopt};
}

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  const Shape s{4, 6};
  cases.push_back(binary_op("add", s, s, -2, 2, [](Tape& t, const Tensor& a, const Tensor& b) { return ad::add(t, a, b); }));
  cases.push_back(binary_op("sub", s, s, -2, 2, [](Tape& t, const Tensor& a, const Tensor& b) { return ad::sub(t, a, b); }));
  cases.push_back(binary_op("mul", s, s, -2, 2, [](Tape& t, const Tensor& a, const Tensor& b) { return ad::mul(t, a, b); }));
  cases.push_back(binary_op("div", s, s, 0.5, 2, [](Tape& t, const Tensor& a, const Tensor& b) { return ad::div(t, a, b); }));
  cases.push_back(binary_op("matmul", {3, 5}, {5, 4}, -2, 2,
                            [](Tape& t, const Tensor& a, const Tensor& b) { return ad::matmul(t, a, b); }));
  cases.push_back(binary_op("conv1d", {9, 3}, {3, 3, 2}, -1, 1, [](Tape& t, const Tensor& a, const Tensor& b) {
    return ad::conv1d(t, a, b, {.stride = 1, .padding = 1});
  }));
  cases.push_back(binary_op("conv1d_strided", {10, 2}, {3, 2, 3}, -1, 1, [](Tape& t, const Tensor& a, const Tensor& b) {
    return ad::conv1d(t, a, b, {.stride = 2, .padding = 0});
  }));
  cases.push_back(binary_op("conv2d", {2, 6, 5}, {3, 2, 3, 3}, -1, 1, [](Tape& t, const Tensor& a, const Tensor& b) {
    return ad::conv2d(t, a, b, {.pad_h = 1, .pad_w = 1});
  }));
  cases.push_back(binary_op("conv2d_strided", {1, 7, 6}, {2, 1, 3, 2}, -1, 1, [](Tape& t, const Tensor& a, const Tensor& b) {
    return ad::conv2d(t, a, b, {.stride_h = 2, .stride_w = 1, .pad_h = 0, .pad_w = 1});
  }));
  cases.push_back(binary_op("add_bias", {3, 4, 2}, {4}, -1, 1,
                            [](Tape& t, const Tensor& a, const Tensor& b) { return ad::add_bias(t, a, b, 1); }));
  cases.push_back(binary_op("concat", {2, 3}, {4, 3}, -1, 1, [](Tape& t, const Tensor& a, const Tensor& b) {
    return ad::concat(t, {a, b}, 0);
  }));

  cases.push_back(unary("add_scalar", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::add_scalar(t, x, 0.7); }));
  cases.push_back(unary("mul_scalar", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::mul_scalar(t, x, -1.3); }));
  cases.push_back(unary("square", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::square(t, x); }));
  cases.push_back(unary("reciprocal", s, 0.5, 2, [](Tape& t, const Tensor& x) { return ad::reciprocal(t, x); }));
  cases.push_back(unary("exp", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::exp(t, x); }));
  cases.push_back(unary("log", s, 0.5, 2, [](Tape& t, const Tensor& x) { return ad::log(t, x); }));
  cases.push_back(unary("sigmoid", s, -3, 3, [](Tape& t, const Tensor& x) { return ad::sigmoid(t, x); }));
  cases.push_back(unary("tanh", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::tanh(t, x); }));
  cases.push_back(unary("relu", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::relu(t, x); }));
  // bounds sit on grid boundaries, away from every value
  cases.push_back(unary("clamp", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::clamp(t, x, -1.0, 1.0); }));
  cases.push_back(unary("max_pool2d", {2, 6, 4}, -2, 2, [](Tape& t, const Tensor& x) { return ad::max_pool2d(t, x, 2, 2); }));
  cases.push_back(unary("sum", {3, 4, 2}, -2, 2, [](Tape& t, const Tensor& x) { return ad::sum(t, x, 1); }));
  cases.push_back(unary("mean", {3, 4, 2}, -2, 2, [](Tape& t, const Tensor& x) { return ad::mean(t, x, 2); }));
  cases.push_back(unary("sum_all", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::sum_all(t, x); }));
  cases.push_back(unary("mean_all", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::mean_all(t, x); }));
  cases.push_back(unary("gather", s, -2, 2, [](Tape& t, const Tensor& x) {
    return ad::gather(t, x, {0, 5, 5, 23, 11, 2, 0}, {7});
  }));
  cases.push_back(unary("broadcast", {3, 1}, -2, 2, [](Tape& t, const Tensor& x) { return ad::broadcast(t, x, {3, 4}); }));
  cases.push_back(unary("reshape", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::reshape(t, x, {6, 4}); }));
  cases.push_back(unary("transpose", s, -2, 2, [](Tape& t, const Tensor& x) { return ad::transpose(t, x); }));
  return cases;
}

std::vector<Case> model_block_cases(const ModelConfig& model, std::size_t coords_per_leaf, std::size_t frames) {
  std::vector<Case> cases;

  cases.push_back({"gru", [](PointSource& src) {
                     const std::size_t T = 7, I = 3, H = 4;
                     auto x = src.normal({T, I});
                     auto wi = src.normal({I, 3 * H}, 0.5);
                     auto wh = src.normal({H, 3 * H}, 0.5);
                     auto bi = src.normal({3 * H}, 0.5);
                     auto bh = src.normal({3 * H}, 0.5);
                     auto w = src.normal({2 * T, H}, 1.0, false);
                     ad::ScalarFn f = [=](Tape& tape) {
                       auto fwd = gru_layer(tape, x, wi, wh, bi, bh, false);
                       auto bwd = gru_layer(tape, x, wi, wh, bi, bh, true);
                       return project(tape, ad::concat(tape, {fwd, bwd}, 0), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{x, wi, wh, bi, bh});
                   },
                   std::nullopt});

  for (auto padding : {PaddingPolicy::reflect, PaddingPolicy::replicate}) {
    for (std::size_t length : {3, 9, 33}) {
      const MedianWindowConfig cfg{length, 1e-4, padding};
      cases.push_back({"softmedian_filter[L=" + std::to_string(length) + "," + std::string(to_string(padding)) + "]",
                       [cfg](PointSource& src) {
                         auto x = src.spaced({24, 3}, -2, 2);
                         auto w = src.normal({24, 3}, 1.0, false);
                         ad::ScalarFn f = [=](Tape& tape) { return project(tape, softmedian_filter(tape, x, cfg), w); };
                         return std::make_pair(f, std::vector<Tensor>{x});
                       },
                       std::nullopt});
    }
    cases.push_back({"softmedian_bank[" + std::string(to_string(padding)) + "]", [padding](PointSource& src) {
                       auto x = src.spaced({24, 3}, -2, 2);
                       const auto lengths = SMCConfig::default_filter_lengths();
                       auto w = src.normal({lengths.size(), 24, 3}, 1.0, false);
                       ad::ScalarFn f = [=](Tape& tape) {
                         return project(tape, softmedian_bank(tape, x, lengths, 1e-4, padding), w);
                       };
                       return std::make_pair(f, std::vector<Tensor>{x});
                     },
                     std::nullopt});
  }

  for (auto sharing : {WeightSharing::shared_scalar, WeightSharing::per_channel}) {
    cases.push_back({"smc_forward[" + std::string(to_string(sharing)) + "]", [sharing](PointSource& src) {
                       SMCConfig cfg;
                       cfg.weight_sharing = sharing;
                       auto p = smc_init(cfg, 4, src.next());
                       auto x = src.spaced({16, 4}, -2, 2);
                       auto w = src.normal({16, 4}, 1.0, false);
                       ad::ScalarFn f = [=](Tape& tape) { return project(tape, smc_forward(tape, x, p, cfg), w); };
                       return std::make_pair(f, std::vector<Tensor>{x, p.weights, p.bias});
                     },
                     std::nullopt});
  }

  cases.push_back({"linear_softmax_pool", [](PointSource& src) {
                     auto y = src.spaced({10, 4}, 0.05, 0.95);
                     auto w = src.normal({4}, 1.0, false);
                     ad::ScalarFn f = [=](Tape& tape) { return project(tape, linear_softmax_pool(tape, y), w); };
                     return std::make_pair(f, std::vector<Tensor>{y});
                   },
                   std::nullopt});

  cases.push_back({"sed_loss", [](PointSource& src) {
                     auto strong = src.spaced({8, 4}, 0.05, 0.95);
                     auto weak = src.spaced({4}, 0.05, 0.95);
                     auto strong_ref = src.binary({8, 4});
                     auto weak_ref = src.binary({4});
                     ad::ScalarFn f = [=](Tape& tape) { return sed_loss(tape, strong, strong_ref, weak, weak_ref, 1.0); };
                     return std::make_pair(f, std::vector<Tensor>{strong, weak});
                   },
                   std::nullopt});

  cases.push_back({"model_sed_loss", [model, frames](PointSource& src) {
                     auto params = init_params(model, src.next());
                     auto features = src.normal({frames, model.freq_bins}, 1.0, false);
                     const auto out_frames = model.output_frames(frames);
                     auto strong_ref = src.binary({out_frames, model.num_classes});
                     auto weak_ref = src.binary({model.num_classes});
                     ad::ScalarFn f = [=](Tape& tape) {
                       const auto out = model_forward(tape, features, params, model);
                       return sed_loss(tape, out.strong, strong_ref, out.weak, weak_ref, 1.0);
                     };
                     return std::make_pair(f, params.tensors());
                   },
                   coords_per_leaf});
  return cases;
}

}  // namespace

SuiteReport run_gradcheck_suite(const ModelConfig& model, const SuiteOptions& options,
                                const std::function<void(const SuiteEntry&)>& on_entry) {
  model.validate();
  if (options.points == 0) fail(ErrorCode::invalid_argument, "gradcheck suite: points must be positive");
  auto cases = primitive_cases();
  for (auto& c : model_block_cases(model, options.model_coords_per_leaf, options.model_frames)) {
    cases.push_back(std::move(c));
  }

  SuiteReport suite;
  PointSource src(options.seed);
  for (const auto& c : cases) {
    SuiteEntry entry{c.name, {}, 0};
    auto check = options.check;
    if (c.coords_per_leaf) check.max_coords_per_leaf = c.coords_per_leaf;
    for (std::size_t p = 0; p < options.points; ++p) {
      auto [f, leaves] = c.make(src);
      const auto report = ad::gradcheck(f, leaves, check);
      entry.report = p == 0 ? report : ad::merge(entry.report, report);
      ++entry.points;
    }
    // Mostly kink-free probing is part of passing: a check that skipped most
    // of its coordinates has not shown much.
    const auto probed = entry.report.coords_checked + entry.report.coords_skipped;
    entry.report.pass = entry.report.pass && entry.report.coords_checked > 0 &&
                        4 * entry.report.coords_checked >= 3 * probed;
    suite.pass = suite.pass && entry.report.pass;
    suite.max_rel_err = std::max(suite.max_rel_err, entry.report.max_rel_err);
    if (on_entry) on_entry(entry);
    suite.entries.push_back(std::move(entry));
  }
  return suite;
}

}  // namespace smc
