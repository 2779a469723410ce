#pragma once

// Run configuration file.
//
//   # comment (whole lines only)
//   format_version = 1
//   seed = 1
//   [prior]
//   num_classes = 5
//   delta = 3.0            # scalar, or D rows of K-1 values
//   [train]
//   prior_kind = "rcg"
//   portions = [0.2, 0.35, 0.5]
//   [synth]
//   domain_shift_scale = 0.8
//   [compare]
//   seeds = [1, 2, 3, 4, 5]
//
// Every value is a JSON literal. Unknown sections or keys, duplicates and
// type mismatches raise ConfigError naming the key and line.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "rcg/rcg_prior.hpp"
#include "rcg/synth.hpp"
#include "rcg/uda_trainer.hpp"

namespace rcg {

inline constexpr int kConfigFormatVersion = 1;

/// Constrained RCG parameters as written in a config file.
struct PriorSpec {
  std::size_t num_classes = 5;
  std::size_t content_dim = 4;
  double sigma_rule = 3.0;
  std::vector<double> mu1;                  // D; empty means all 0
  std::vector<std::vector<double>> delta;   // D x (K-1); empty means all 3
  std::vector<std::vector<double>> sigma;   // D x (K-1); empty means all 1

  /// Raw parameters; throws ConfigError if the values violate the rule.
  RcgParams params() const;
};

struct CompareSpec {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct RunConfig {
  int format_version = kConfigFormatVersion;
  std::uint64_t seed = 1;
  PriorSpec prior;
  TrainConfig train;
  SynthSpec synth;
  CompareSpec compare;

  /// Sets the top-level, training and data seeds together.
  void override_seed(std::uint64_t s);
};

RunConfig parse_config(std::istream& in, const std::string& source_name = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Writes every key with its current value; parse_config reads it back.
std::string render_config(const RunConfig& cfg);

}  // namespace rcg
