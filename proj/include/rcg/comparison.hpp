#pragma once

// Prior comparison on the synthetic benchmark: every arm is trained on the
// same datasets for each seed and scored on the held-out target test set.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rcg/metrics.hpp"
#include "rcg/synth.hpp"
#include "rcg/uda_trainer.hpp"

namespace rcg {

struct ArmSpec {
  std::string name;
  TrainConfig cfg;
};

/// Arms derived from `base`, each trained for the same total number of
/// epochs:
///   source_only     the full pipeline with rounds = 0, never sees target data
///   source_only_ce  encoder and classifier trained on source cross-entropy alone
///   iid_gaussian    adaptation with a standard normal content prior
///   rcg_3sigma      adaptation with the RCG prior, m = 3
///   rcg_2sigma      adaptation with the RCG prior, m = 2
std::vector<ArmSpec> standard_arms(const TrainConfig& base);

/// `base` with adversarial terms switched off, for ablations.
TrainConfig without_adversarial(TrainConfig base);

struct ArmResult {
  std::string name;
  std::vector<OrdinalScores> per_seed;  // aligned with ComparisonReport::seeds
  OrdinalScores median;                 // metric-wise median over seeds
};

struct ComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<ArmResult> arms;

  /// Throws InvalidArgument for an unknown arm name.
  const ArmResult& arm(const std::string& name) const;
};

/// Seed s generates the data with spec.seed = s and trains every arm with
/// cfg.seed = s. Seeds run on up to `threads` workers; the result does not
/// depend on the worker count.
ComparisonReport run_comparison(const SynthSpec& spec, const std::vector<ArmSpec>& arms,
                                const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

double median(std::vector<double> values);

/// arm,seed,accuracy,mae,qwk rows; the median rows use seed "median".
void write_comparison_csv(std::ostream& os, const ComparisonReport& report);
void write_comparison_markdown(std::ostream& os, const ComparisonReport& report,
                               const SynthSpec& spec);

/// RCG_THREADS, or 1 when unset or empty. Any other value that is not a
/// positive integer throws ConfigError.
std::size_t threads_from_env();

}  // namespace rcg
