#pragma once

// Subcommands of the rcg executable. Each returns the process exit code and
// writes its artifacts under options.out.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "rcg/config.hpp"

namespace rcg::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsageOrIo = 2 };

struct Options {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  bool quiet = false;

  // Subcommand specific.
  std::size_t cases = 20;                             // kl-validate
  std::optional<std::filesystem::path> checkpoint;    // eval
  std::optional<std::filesystem::path> data;          // eval
  bool ablation = false;                              // report
};

/// Config file (or defaults) with the --seed override applied.
RunConfig resolve_config(const Options& opt);

int prior_sample(const Options& opt, std::ostream& log);
int prior_check(const Options& opt, std::ostream& log);
int kl_validate(const Options& opt, std::ostream& log);
int gradcheck(const Options& opt, std::ostream& log);
int gen_data(const Options& opt, std::ostream& log);
int train(const Options& opt, std::ostream& log);
int eval(const Options& opt, std::ostream& log);
int report(const Options& opt, std::ostream& log);

/// Upper bound on a pair's violation rate at n draws: the one-sided normal
/// tail at the pair's delta/sigma ratio plus five binomial standard errors.
double violation_threshold(double ratio, std::size_t n);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace rcg::cli
