#include "smc/median.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace smc {

namespace {

// Position (within the window) of the median element. Ties on value are broken
// by position so the selected index is deterministic.
std::size_t median_position(std::span<const double> window, std::vector<double>& scratch) {
  scratch.assign(window.begin(), window.end());
  const std::size_t half = window.size() / 2;
  const auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(half);
  std::nth_element(scratch.begin(), mid, scratch.end());
  const double m = *mid;
  // rank `half` in (value, position) order: skip the copies of m that rank below it
  std::size_t below = 0;
  for (double v : window) below += v < m;
  std::size_t skip = half - below;
  for (std::size_t k = 0;; ++k) {
    if (window[k] == m && skip-- == 0) return k;
  }
}

// Four independent partial sums; keeps the reduction off a single
// dependency chain.
double sum4(const double* v, std::size_t n) {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a += v[i];
    b += v[i + 1];
    c += v[i + 2];
    d += v[i + 3];
  }
  for (; i < n; ++i) a += v[i];
  return (a + b) + (c + d);
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    fail(ErrorCode::invalid_argument, "soft-median epsilon must be positive and finite");
  }
}

}  // namespace

PaddingPolicy parse_padding(std::string_view name) {
  if (name == "reflect") return PaddingPolicy::reflect;
  if (name == "replicate") return PaddingPolicy::replicate;
  fail(ErrorCode::invalid_argument, "unknown padding policy '" + std::string(name) + "' (expected reflect|replicate)");
}

std::string_view to_string(PaddingPolicy policy) {
  return policy == PaddingPolicy::reflect ? "reflect" : "replicate";
}

void MedianWindowConfig::validate() const {
  if (length == 0 || length % 2 == 0) {
    fail(ErrorCode::invalid_argument, "window length must be odd (got " + std::to_string(length) + ")");
  }
  require_epsilon(epsilon);
}

std::vector<std::size_t> padded_source_indices(std::size_t frames, std::size_t length, PaddingPolicy policy) {
  if (frames == 0) fail(ErrorCode::invalid_argument, "median filter needs at least one frame");
  const auto half = static_cast<std::ptrdiff_t>(length / 2);
  const auto T = static_cast<std::ptrdiff_t>(frames);
  std::vector<std::size_t> src(frames + 2 * static_cast<std::size_t>(half));
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(src.size()); ++j) {
    const std::ptrdiff_t i = j - half;
    std::ptrdiff_t mapped = 0;
    if (policy == PaddingPolicy::replicate) {
      mapped = std::clamp<std::ptrdiff_t>(i, 0, T - 1);
    } else if (T > 1) {
      // mirror folding repeats with period 2(T-1), so windows longer than the
      // signal stay well defined
      const std::ptrdiff_t period = 2 * (T - 1);
      std::ptrdiff_t r = i % period;
      if (r < 0) r += period;
      mapped = r < T ? r : period - r;
    }
    src[static_cast<std::size_t>(j)] = static_cast<std::size_t>(mapped);
  }
  return src;
}

std::vector<double> argmedian_filter(std::span<const double> x, const MedianWindowConfig& cfg) {
  cfg.validate();
  if (cfg.length == 1) return {x.begin(), x.end()};
  const auto src = padded_source_indices(x.size(), cfg.length, cfg.padding);
  std::vector<double> out(x.size());
  std::vector<double> window(cfg.length);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(cfg.length / 2);
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t k = 0; k < cfg.length; ++k) window[k] = x[src[t + k]];
    std::nth_element(window.begin(), mid, window.end());
    out[t] = *mid;
  }
  return out;
}

std::vector<double> softmedian_weights(std::span<const double> window, double epsilon) {
  require_epsilon(epsilon);
  if (window.empty() || window.size() % 2 == 0) {
    fail(ErrorCode::invalid_argument, "window length must be odd (got " + std::to_string(window.size()) + ")");
  }
  std::vector<double> scratch;
  const double med = window[median_position(window, scratch)];
  std::vector<double> w(window.size());
  double total = 0.0;
  for (std::size_t k = 0; k < window.size(); ++k) {
    const double d = window[k] - med;
    w[k] = 1.0 / (d * d + epsilon);
    total += w[k];
  }
  for (auto& v : w) v /= total;
  return w;
}

double softmedian_window(std::span<const double> window, double epsilon) {
  const auto w = softmedian_weights(window, epsilon);
  double y = 0.0;
  for (std::size_t k = 0; k < window.size(); ++k) y += w[k] * window[k];
  return y;
}

ad::Tensor softmedian_window(ad::Tape& tape, const ad::Tensor& window, double epsilon) {
  require_epsilon(epsilon);
  if (window.rank() != 1 || window.numel() % 2 == 0) {
    fail(ErrorCode::invalid_argument, "softmedian_window: expected a rank-1 window of odd length, got " +
                                          ad::to_string(window.shape()));
  }
  const auto L = window.numel();
  std::vector<double> scratch;
  const auto m = median_position(window.data(), scratch);
  if (tape.track_branches()) tape.note_branches(m);
  auto med = ad::gather(tape, window, std::vector<std::size_t>(L, m), {L});
  auto inv = ad::reciprocal(tape, ad::add_scalar(tape, ad::square(tape, ad::sub(tape, window, med)), epsilon));
  auto norm = ad::broadcast(tape, ad::sum(tape, inv, 0), {L});
  auto weights = ad::div(tape, inv, norm);
  return ad::sum_all(tape, ad::mul(tape, weights, window));
}

ad::Tensor softmedian_filter(ad::Tape& tape, const ad::Tensor& x, const MedianWindowConfig& cfg) {
  cfg.validate();
  if (x.rank() != 1 && x.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "softmedian_filter: expected [T] or [T x C], got " + ad::to_string(x.shape()));
  }
  if (cfg.length == 1) return x;  // W = 1 on the single element: exact identity

  const std::size_t T = x.extent(0);
  const std::size_t C = x.rank() == 2 ? x.extent(1) : 1;
  const std::size_t L = cfg.length;
  const auto src = padded_source_indices(T, L, cfg.padding);
  auto xv = x.data();

  std::vector<std::size_t> window_index(T * L * C);
  std::vector<std::size_t> median_index(T * L * C);
  std::vector<double> window(L);
  std::vector<double> scratch;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < L; ++k) window[k] = xv[src[t + k] * C + c];
      const std::size_t m = src[t + median_position(window, scratch)] * C + c;
      for (std::size_t k = 0; k < L; ++k) {
        const std::size_t flat = (t * L + k) * C + c;
        window_index[flat] = src[t + k] * C + c;
        median_index[flat] = m;
      }
    }
  }

  if (tape.track_branches()) {
    ad::BranchDigest d;
    for (auto m : median_index) d.add(m);
    tape.note_branches(d.value());
  }
  const ad::Shape wshape{T, L, C};
  auto windows = ad::gather(tape, x, std::move(window_index), wshape);
  auto med = ad::gather(tape, x, std::move(median_index), wshape);
  auto inv = ad::reciprocal(tape, ad::add_scalar(tape, ad::square(tape, ad::sub(tape, windows, med)), cfg.epsilon));
  auto norm = ad::broadcast(tape, ad::sum(tape, inv, 1), wshape);
  auto weights = ad::div(tape, inv, norm);
  auto y = ad::sum(tape, ad::mul(tape, weights, windows), 1);
  return ad::reshape(tape, y, x.shape());
}

ad::Tensor softmedian_bank(ad::Tape& tape, const ad::Tensor& x, std::span<const std::size_t> lengths, double epsilon,
                           PaddingPolicy padding) {
  require_epsilon(epsilon);
  if (lengths.empty()) fail(ErrorCode::invalid_argument, "softmedian_bank: no window lengths");
  for (auto L : lengths) MedianWindowConfig{L, epsilon, padding}.validate();
  if (x.rank() != 1 && x.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "softmedian_bank: expected [T] or [T x C], got " + ad::to_string(x.shape()));
  }
  tape.check_inputs("softmedian_bank", {&x});

  const std::size_t T = x.extent(0);
  const std::size_t C = x.rank() == 2 ? x.extent(1) : 1;
  const std::size_t N = lengths.size();
  const std::size_t H = *std::max_element(lengths.begin(), lengths.end()) / 2;
  const std::size_t P = T + 2 * H;
  std::vector<std::size_t> halves;
  for (auto L : lengths) {
    if (!halves.empty() && L / 2 <= halves.back()) {
      fail(ErrorCode::invalid_argument, "softmedian_bank: window lengths must be strictly increasing");
    }
    halves.push_back(L / 2);
  }

  // The padding map does not depend on the window length, so one padded
  // column serves every filter and the windows centred on t are nested.
  const auto src = padded_source_indices(T, 2 * H + 1, padding);
  const auto xv = x.data();
  std::vector<double> padded(C * P);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < P; ++j) padded[c * P + j] = xv[src[j] * C + c];

  std::vector<std::size_t> median_at(N * T * C);  // padded position of each selected median
  std::vector<double> norm(N * T * C);
  std::vector<double> out(N * T * C);
  std::vector<std::size_t> order(2 * H + 1);
  std::vector<double> u(2 * H + 1);
  for (std::size_t c = 0; c < C; ++c) {
    const double* col = padded.data() + c * P;
    for (std::size_t t = 0; t < T; ++t) {
      // Grow the window filter by filter, keeping its offsets sorted by
      // (value, position); the median of half-width h is then entry h.
      const double* win = col + t;
      auto before = [win](std::size_t a, std::size_t b) { return win[a] < win[b] || (win[a] == win[b] && a < b); };
      auto insert = [&](std::size_t k, std::size_t& n) {
        std::size_t i = n++;
        for (; i > 0 && before(k, order[i - 1]); --i) order[i] = order[i - 1];
        order[i] = k;
      };
      std::size_t filled = 0, grown = 0;  // grown: half-width covered so far
      insert(H, filled);
      for (std::size_t f = 0; f < N; ++f) {
        const std::size_t h = halves[f];
        for (; grown < h; ++grown) {
          insert(H - grown - 1, filled);
          insert(H + grown + 1, filled);
        }
        const std::size_t pos = order[h];
        const double m = win[pos];
        const double* w = win + (H - h);
        const std::size_t L = 2 * h + 1;
        for (std::size_t k = 0; k < L; ++k) {
          const double d = w[k] - m;
          u[k] = 1.0 / (d * d + epsilon);
        }
        const double den = sum4(u.data(), L);
        for (std::size_t k = 0; k < L; ++k) u[k] *= w[k];
        const double num = sum4(u.data(), L);
        const std::size_t o = (f * T + t) * C + c;
        median_at[o] = t + pos;
        norm[o] = den;
        out[o] = num / den;
      }
    }
  }

  if (tape.track_branches()) {
    ad::BranchDigest d;
    for (auto m : median_at) d.add(src[m]);
    tape.note_branches(d.value());
  }
  ad::Shape shape{N, T, C};
  return tape.record(
      "softmedian_bank", {x}, std::move(shape), std::move(out),
      [src, padded = std::move(padded), median_at = std::move(median_at), norm = std::move(norm),
       halves = std::move(halves), T, C, N, H, P,
       epsilon](std::span<const double> y, std::span<const double> g, std::span<std::vector<double>*> grads) {
        auto& dx = *grads[0];
        std::vector<double> dpad(P), dw(2 * H + 1), second(2 * H + 1);
        for (std::size_t c = 0; c < C; ++c) {
          const double* col = padded.data() + c * P;
          std::fill(dpad.begin(), dpad.end(), 0.0);
          for (std::size_t f = 0; f < N; ++f) {
            const std::size_t h = halves[f];
            for (std::size_t t = 0; t < T; ++t) {
              const std::size_t o = (f * T + t) * C + c;
              if (g[o] == 0.0) continue;
              const double m = col[median_at[o]];
              const double scale = g[o] / norm[o];
              const double yo = y[o];
              // with u_k = 1 / ((x_k - m)^2 + eps) and S = sum u:
              // dy/dx_k = (u_k - 2 (x_k - m)(x_k - y) u_k^2) / S; the median takes
              // the second sum back with the opposite sign
              const double* w = col + t + H - h;
              double* dst = dpad.data() + t + H - h;
              const std::size_t L = 2 * h + 1;
              for (std::size_t k = 0; k < L; ++k) {
                const double diff = w[k] - m;
                const double u = 1.0 / (diff * diff + epsilon);
                second[k] = 2.0 * diff * (w[k] - yo) * u * u;
                dw[k] = u - second[k];
              }
              for (std::size_t k = 0; k < L; ++k) dst[k] += scale * dw[k];
              dpad[median_at[o]] += scale * sum4(second.data(), L);
            }
          }
          for (std::size_t j = 0; j < P; ++j) dx[src[j] * C + c] += dpad[j];
        }
      });
}

}  // namespace smc
