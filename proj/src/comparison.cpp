#include "rcg/comparison.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "rcg/error.hpp"

namespace rcg {

std::vector<ArmSpec> standard_arms(const TrainConfig& base) {
  const std::size_t total_epochs = base.source_epochs + base.rounds * base.epochs_per_round;
  TrainConfig src = base;
  src.source_epochs = total_epochs;
  src.rounds = 0;

  TrainConfig src_ce = src;
  src_ce.alpha = src_ce.beta = src_ce.gamma = 0.0;
  src_ce.adversarial_enabled = false;

  TrainConfig iid = base;
  iid.prior_kind = PriorKind::iid_gaussian;

  TrainConfig rcg3 = base;
  rcg3.prior_kind = PriorKind::rcg;
  rcg3.sigma_rule = 3.0;

  TrainConfig rcg2 = rcg3;
  rcg2.sigma_rule = 2.0;

  return {{"source_only", src},
          {"source_only_ce", src_ce},
          {"iid_gaussian", iid},
          {"rcg_3sigma", rcg3},
          {"rcg_2sigma", rcg2}};
}

TrainConfig without_adversarial(TrainConfig base) {
  base.adversarial_enabled = false;
  return base;
}

const ArmResult& ComparisonReport::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return a;
  throw InvalidArgument("comparison has no arm named '" + name + "'");
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ComparisonReport run_comparison(const SynthSpec& spec, const std::vector<ArmSpec>& arms,
                                const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  if (arms.empty() || seeds.empty())
    throw InvalidArgument("run_comparison: need at least one arm and one seed");
  ComparisonReport report;
  report.seeds = seeds;
  report.arms.resize(arms.size());
  for (std::size_t a = 0; a < arms.size(); ++a) {
    report.arms[a].name = arms[a].name;
    report.arms[a].per_seed.resize(seeds.size());
  }

  // One job per (seed, arm); each writes only its own slot.
  const std::size_t jobs = seeds.size() * arms.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t s = j / arms.size();
      const std::size_t a = j % arms.size();
      try {
        SynthSpec sp = spec;
        sp.seed = seeds[s];
        const SynthDataset data = generate(sp);
        TrainConfig cfg = arms[a].cfg;
        cfg.seed = seeds[s];
        report.arms[a].per_seed[s] = self_training_loop(data, cfg).final_target;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, jobs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& a : report.arms) {
    std::vector<double> acc, mae, qwk;
    for (const auto& s : a.per_seed) {
      acc.push_back(s.accuracy);
      mae.push_back(s.mae);
      qwk.push_back(s.qwk);
    }
    a.median = {median(acc), median(mae), median(qwk)};
  }
  return report;
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& report) {
  os << "arm,seed,accuracy,mae,qwk\n";
  for (const auto& a : report.arms) {
    for (std::size_t s = 0; s < report.seeds.size(); ++s)
      os << a.name << "," << report.seeds[s] << "," << format_double(a.per_seed[s].accuracy) << ","
         << format_double(a.per_seed[s].mae) << "," << format_double(a.per_seed[s].qwk) << "\n";
    os << a.name << ",median," << format_double(a.median.accuracy) << ","
       << format_double(a.median.mae) << "," << format_double(a.median.qwk) << "\n";
  }
}

void write_comparison_markdown(std::ostream& os, const ComparisonReport& report,
                               const SynthSpec& spec) {
  char buf[160];
  os << "# Prior comparison\n\n";
  os << "K = " << spec.num_classes << ", domain shift " << format_double(spec.domain_shift_scale)
     << ", label noise " << format_double(spec.label_noise_rate) << ", " << report.seeds.size()
     << " seeds. Medians over seeds on the target test set.\n\n";
  os << "| arm | accuracy | MAE | QWK |\n|---|---|---|---|\n";
  for (const auto& a : report.arms) {
    std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %.4f |\n", a.name.c_str(),
                  a.median.accuracy, a.median.mae, a.median.qwk);
    os << buf;
  }
  os << "\nPer-seed QWK:\n\n| arm |";
  for (auto s : report.seeds) os << " " << s << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < report.seeds.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& a : report.arms) {
    os << "| " << a.name << " |";
    for (const auto& s : a.per_seed) {
      std::snprintf(buf, sizeof buf, " %.4f |", s.qwk);
      os << buf;
    }
    os << "\n";
  }
}

std::size_t threads_from_env() {
  const char* v = std::getenv("RCG_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("RCG_THREADS must be a positive integer, got '" + std::string(v) + "'");
  return static_cast<std::size_t>(n);
}

}  // namespace rcg
