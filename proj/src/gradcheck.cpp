#include "smc/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace smc::ad {

namespace {

struct Evaluation {
  double value;
  std::uint64_t signature;
};

Evaluation evaluate(const ScalarFn& f) {
  Tape tape;
  const Tensor out = f(tape);
  if (out.numel() != 1) {
    fail(ErrorCode::shape_mismatch, "gradcheck: function must return a scalar, got shape " + to_string(out.shape()));
  }
  return {out.item(), tape.branch_signature()};
}

std::vector<std::size_t> probe_coords(std::size_t n, const std::optional<std::size_t>& limit) {
  std::vector<std::size_t> coords;
  if (!limit || *limit >= n) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    return coords;
  }
  const std::size_t k = std::max<std::size_t>(*limit, 1);
  for (std::size_t j = 0; j < k; ++j) coords.push_back(j * n / k);
  return coords;
}

}  // namespace

GradcheckReport gradcheck(const ScalarFn& f, std::vector<Tensor> leaves, const GradcheckOptions& options) {
  if (!(options.step > 0.0)) fail(ErrorCode::invalid_argument, "gradcheck: step must be positive");
  for (auto& leaf : leaves) {
    if (!leaf.is_leaf()) fail(ErrorCode::invalid_argument, "gradcheck: inputs must be leaf tensors");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }

  std::uint64_t base_signature = 0;
  {
    Tape tape;
    const Tensor out = f(tape);
    if (out.numel() != 1) {
      fail(ErrorCode::shape_mismatch, "gradcheck: function must return a scalar, got shape " + to_string(out.shape()));
    }
    base_signature = tape.branch_signature();
    tape.backward(out);
  }

  GradcheckReport report;
  const double h = options.step;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto& leaf = leaves[l];
    auto values = leaf.mutable_data();
    for (auto i : probe_coords(leaf.numel(), options.max_coords_per_leaf)) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        return evaluate(f);
      };
      std::array<Evaluation, 4> probes{};
      std::size_t used = 0;
      double numeric = 0.0;
      if (options.stencil == Stencil::central3) {
        probes[used++] = at(h);
        probes[used++] = at(-h);
        numeric = (probes[0].value - probes[1].value) / (2.0 * h);
      } else {
        probes[used++] = at(-2.0 * h);
        probes[used++] = at(-h);
        probes[used++] = at(h);
        probes[used++] = at(2.0 * h);
        numeric = (probes[0].value - 8.0 * probes[1].value + 8.0 * probes[2].value - probes[3].value) / (12.0 * h);
      }
      values[i] = saved;
      if (options.skip_branch_changes &&
          std::any_of(probes.begin(), probes.begin() + static_cast<std::ptrdiff_t>(used),
                      [&](const Evaluation& e) { return e.signature != base_signature; })) {
        ++report.coords_skipped;
        continue;
      }

      const double analytic = leaf.grad()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (report.coords_checked == 1 || err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_leaf = l;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= options.tolerance;
  return report;
}

GradcheckReport gradcheck(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                          const GradcheckOptions& options) {
  Tensor leaf = x.detach();
  return gradcheck([&](Tape& tape) { return f(tape, leaf); }, {leaf}, options);
}

GradcheckReport merge(const GradcheckReport& a, const GradcheckReport& b) {
  GradcheckReport out = a.max_rel_err >= b.max_rel_err ? a : b;
  out.coords_checked = a.coords_checked + b.coords_checked;
  out.coords_skipped = a.coords_skipped + b.coords_skipped;
  out.pass = a.pass && b.pass;
  return out;
}

}  // namespace smc::ad
