#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "smc/autodiff.hpp"

namespace smc::ad {

enum class Stencil {
  central3,  // (f(x+h) - f(x-h)) / 2h, error O(h^2)
  central5,  // (f(x-2h) - 8 f(x-h) + 8 f(x+h) - f(x+2h)) / 12h, error O(h^4)
};

struct GradcheckOptions {
  double step = 1e-4;
  Stencil stencil = Stencil::central5;
  double tolerance = 1e-3;
  // When set, only this many coordinates per leaf are probed, chosen evenly
  // spaced; the full check is O(2 * numel) function evaluations.
  std::optional<std::size_t> max_coords_per_leaf;
  // Skip coordinates whose +-step probes change a branch decision (see
  // Tape::branch_signature): the central difference straddles a kink there
  // and says nothing about the gradient.
  bool skip_branch_changes = true;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;  // probes that crossed a kink
  // location of the worst coordinate
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// A scalar-valued function of the current values of some leaves. It must
// record onto the tape it is given and return a one-element tensor.
using ScalarFn = std::function<Tensor(Tape&)>;

// Compares the tape gradient of `f` with respect to each leaf against a
// central difference along e_i with step h. The relative error
// of a coordinate is |a - n| / max(|a|, |n|, 1e-8). Leaves are restored to
// their original values and keep the analytic gradient on return.
GradcheckReport gradcheck(const ScalarFn& f, std::vector<Tensor> leaves, const GradcheckOptions& options = {});

// Single-input convenience form.
GradcheckReport gradcheck(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                          const GradcheckOptions& options = {});

// Merges two reports, keeping the worse one's location.
GradcheckReport merge(const GradcheckReport& a, const GradcheckReport& b);

}  // namespace smc::ad
