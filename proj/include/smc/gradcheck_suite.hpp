#pragma once

// Finite-difference checks over every differentiable building block, the
// soft-median filters, the SMC block, pooling, the loss and the full model.
// Each entry is checked at several random points chosen away from kinks:
// values are drawn on a jittered grid so no two are closer than a fixed gap,
// which keeps medians, max-pool winners and ReLU signs stable under the
// finite-difference step. The full model cannot be made kink-free that way;
// there the probes that flip a branch are skipped (and counted), and an
// entry only passes when at least 3/4 of its probes were usable.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smc/gradcheck.hpp"
#include "smc/model.hpp"

namespace smc {

struct SuiteOptions {
  ad::GradcheckOptions check;
  std::size_t points = 20;
  std::uint64_t seed = 1;
  // Coordinates probed per parameter tensor in the end-to-end model check.
  std::size_t model_coords_per_leaf = 16;
  std::size_t model_frames = 128;
};

struct SuiteEntry {
  std::string name;
  ad::GradcheckReport report;  // merged over all points
  std::size_t points = 0;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  bool pass = true;
  double max_rel_err = 0.0;
};

SuiteReport run_gradcheck_suite(const ModelConfig& model, const SuiteOptions& options,
                                const std::function<void(const SuiteEntry&)>& on_entry = {});

}  // namespace smc
