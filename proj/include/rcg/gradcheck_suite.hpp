#pragma once

// Finite-difference check of every loss in the pipeline on small random
// models: each loss on its own, then every network's routed objective
// through the full training step.

#include <cstdint>
#include <string>
#include <vector>

#include "rcg/neural.hpp"

namespace rcg {

struct GradcheckEntry {
  std::size_t model = 0;
  std::string check;  // loss or "step/<prior kind>/<network>"
  std::string block;  // parameter block name
  GradcheckResult result;
};

struct GradcheckSuiteResult {
  std::vector<GradcheckEntry> entries;
  double max_rel_error() const;
  /// Entry with the largest relative error.
  const GradcheckEntry& worst() const;
};

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr double kGradcheckStep = 1e-5;

/// Model i uses Rng(seed + i). Residuals of the L1 reconstruction that fall
/// within 1e-3 of zero make the finite difference straddle the kink, so such
/// batches are redrawn.
GradcheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t models);

}  // namespace rcg
