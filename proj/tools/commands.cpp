#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rcg/checkpoint.hpp"
#include "rcg/comparison.hpp"
#include "rcg/error.hpp"
#include "rcg/gradcheck_suite.hpp"
#include "rcg/metrics.hpp"
#include "rcg/monte_carlo.hpp"
#include "rcg/synth.hpp"
#include "rcg/uda_trainer.hpp"

namespace rcg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void prepare_out(const Options& opt) {
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + opt.out.string() + ": " + ec.message());
}

std::ofstream open_out(const Options& opt, const std::string& name) {
  const fs::path p = opt.out / name;
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

class Log {
public:
  Log(std::ostream& os, bool quiet) : os_(os), quiet_(quiet) {}
  template <class... T>
  void info(const T&... parts) {
    if (quiet_) return;
    (os_ << ... << parts) << "\n";
  }
  /// One-line PASS/FAIL summary; printed even when quiet.
  int verdict(bool pass, const std::string& command, const std::string& detail) {
    os_ << (pass ? "PASS " : "FAIL ") << command << ": " << detail << "\n";
    return pass ? kOk : kCheckFailed;
  }

private:
  std::ostream& os_;
  bool quiet_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string iso_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_rows(std::ostream& os, const std::vector<Vector>& x, const std::vector<int>& y) {
  const std::size_t d = x.empty() ? 0 : x.front().size();
  for (std::size_t j = 0; j < d; ++j) os << "x" << j << ",";
  os << "label\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double v : x[i]) os << format_double(v) << ",";
    os << y[i] << "\n";
  }
}

LabeledSet read_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty data file");
  LabeledSet set;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (cells.size() < 2) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": too few columns");
    const int label = static_cast<int>(cells.back());
    if (label < 0) continue;  // hidden target label
    cells.pop_back();
    Vector x(cells.size());
    std::copy(cells.begin(), cells.end(), x.begin());
    if (!set.x.empty() && x.size() != set.x.front().size())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    set.x.push_back(std::move(x));
    set.y.push_back(label);
  }
  if (set.x.empty()) throw ConfigError(path.string() + ": no labeled rows");
  return set;
}

json scores_json(const OrdinalScores& s) {
  return {{"accuracy", s.accuracy}, {"mae", s.mae}, {"qwk", s.qwk}};
}

json losses_json(const LossTerms& l) {
  return {{"ce", l.ce},         {"kl_content", l.kl_content}, {"kl_style_s", l.kl_style_s},
          {"kl_style_t", l.kl_style_t}, {"l1_s", l.l1_s},     {"l1_t", l.l1_t},
          {"adv_s", l.adv_s},   {"adv_t", l.adv_t},           {"dis_s", l.dis_s},
          {"dis_t", l.dis_t}};
}

// Random RCG parameters and fused posteriors for the KL check.
struct KlCase {
  RcgParams params;
  std::vector<DiagGaussian> fused;
  DiagGaussian style;
};

KlCase random_kl_case(Rng& rng) {
  const std::size_t K = 2 + rng.below(5);
  const std::size_t D = 1 + rng.below(8);
  KlCase c;
  c.params = RcgParams(K, D, 2.0 + 2.0 * rng.uniform());
  for (double& v : c.params.mu1_values()) v = rng.normal();
  for (double& v : c.params.delta_raw()) v = 0.5 * rng.normal();
  for (double& v : c.params.sigma_raw()) v = rng.normal();
  // Posterior means at a chain draw and variances near the conditional
  // ones, so the cases sit in the regime training visits.
  const Matrix anchor = sample_chain(c.params, rng);
  for (std::size_t k = 0; k < K; ++k) {
    Vector mean(D), logvar(D);
    for (std::size_t d = 0; d < D; ++d) {
      const double s = c.params.sigma(d, k);
      mean[d] = anchor(k, d) + s * rng.normal();
      logvar[d] = 2.0 * std::log(s) + 2.0 * (rng.uniform() - 0.5);
    }
    c.fused.emplace_back(mean, logvar);
  }
  // Style means at least one unit from zero keep the KL away from 0, where
  // a relative error is dominated by Monte Carlo noise.
  Vector m(D), lv(D);
  for (std::size_t d = 0; d < D; ++d) {
    const double magnitude = 1.0 + std::abs(rng.normal());
    m[d] = rng.uniform() < 0.5 ? -magnitude : magnitude;
    lv[d] = 2.0 * (rng.uniform() - 0.5);
  }
  c.style = DiagGaussian(m, lv);
  return c;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double violation_threshold(double ratio, std::size_t n) {
  const double p = normal_cdf(-ratio);
  const double nn = static_cast<double>(n);
  return p + 5.0 * std::sqrt(p * (1.0 - p) / nn) + 5.0 / nn;
}

RunConfig resolve_config(const Options& opt) {
  RunConfig cfg = opt.config ? load_config(*opt.config) : RunConfig{};
  if (opt.seed) cfg.override_seed(*opt.seed);
  return cfg;
}

int prior_sample(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  const RcgParams params = cfg.prior.params();
  const std::size_t n = opt.n.value_or(1000);
  if (n < 2) throw ConfigError("--n must be at least 2 for prior-sample");
  prepare_out(opt);
  const std::size_t K = params.num_classes();
  const std::size_t D = params.content_dim();

  Rng rng(cfg.seed);
  const std::vector<Matrix> draws = draw_chains(params, n, rng);
  {
    auto os = open_out(opt, "prior_samples.csv");
    os << "sample,class";
    for (std::size_t d = 0; d < D; ++d) os << ",c" << d;
    os << "\n";
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t k = 0; k < K; ++k) {
        os << s << "," << k;
        for (std::size_t d = 0; d < D; ++d) os << "," << format_double(draws[d](s, k));
        os << "\n";
      }
  }

  const JointGaussianChain joint = build_joint(params);
  const std::vector<MomentEstimate> mc = moments_from_draws(draws);
  auto os = open_out(opt, "prior_moments.csv");
  os << "dim,moment,i,j,closed_form,estimate,std_error,z\n";
  double max_z = 0.0;
  auto row = [&](std::size_t d, const char* what, std::size_t i, std::size_t j, double exact,
                 double est, double se) {
    const double z = se > 0.0 ? (est - exact) / se : 0.0;
    max_z = std::max(max_z, std::abs(z));
    os << d << "," << what << "," << i << "," << j << "," << format_double(exact) << ","
       << format_double(est) << "," << format_double(se) << "," << format_double(z) << "\n";
  };
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t i = 0; i < K; ++i) row(d, "mean", i, i, joint.mean[d][i], mc[d].mean[i], mc[d].mean_se[i]);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        row(d, "cov", i, j, joint.cov[d].base()(i, j), mc[d].cov(i, j), mc[d].cov_se(i, j));
  }
  log.info("prior-sample: ", n, " draws of K=", K, " D=", D, " written to ",
           (opt.out / "prior_samples.csv").string(), "; max |z| of sample moments ", fmt(max_z, 4));
  return kOk;
}

int prior_check(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  const RcgParams params = cfg.prior.params();
  const std::size_t n = opt.n.value_or(100000);
  if (n == 0) throw ConfigError("--n must be positive for prior-check");
  prepare_out(opt);
  Rng rng(cfg.seed);
  const Matrix rates = poset_violation_rate(params, n, rng, threads_from_env());

  auto os = open_out(opt, "violation_rates.csv");
  os << "pair,dim,ratio,rate,expected,threshold,pass\n";
  bool all = true;
  double worst_margin = -INFINITY;
  std::string worst;
  for (std::size_t k = 1; k < params.num_classes(); ++k)
    for (std::size_t d = 0; d < params.content_dim(); ++d) {
      const double ratio = params.delta(d, k) / params.sigma(d, k);
      const double rate = rates(k - 1, d);
      const double thr = violation_threshold(ratio, n);
      const bool pass = rate <= thr;
      all = all && pass;
      if (rate - thr > worst_margin) {
        worst_margin = rate - thr;
        worst = "pair " + std::to_string(k - 1) + "->" + std::to_string(k) + " dim " +
                std::to_string(d) + " rate " + fmt(rate) + " vs threshold " + fmt(thr);
      }
      os << k - 1 << "-" << k << "," << d << "," << format_double(ratio) << ","
         << format_double(rate) << "," << format_double(normal_cdf(-ratio)) << ","
         << format_double(thr) << "," << (pass ? 1 : 0) << "\n";
    }
  log.info("prior-check: n=", n, ", rates in ", (opt.out / "violation_rates.csv").string());
  return log.verdict(all, "prior-check", "worst " + worst);
}

int kl_validate(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  const std::size_t n = opt.n.value_or(200000);
  if (n < 2 || opt.cases == 0) throw ConfigError("kl-validate needs --n >= 2 and --cases >= 1");
  prepare_out(opt);
  Rng rng(cfg.seed);
  auto os = open_out(opt, "kl_validate.csv");
  os << "config_id,kind,K,D,closed_form,mc_estimate,std_error,rel_error,pass\n";
  constexpr double tol = 0.02;
  bool all = true;
  double worst = 0.0;
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const KlCase kc = random_kl_case(rng);
    const std::size_t K = kc.params.num_classes(), D = kc.params.content_dim();
    auto emit = [&](const char* kind, double exact, const Estimate& mc) {
      const double rel = std::abs(exact - mc.value) / std::abs(exact);
      const bool pass = rel < tol;
      all = all && pass;
      worst = std::max(worst, rel);
      os << c << "," << kind << "," << K << "," << D << "," << format_double(exact) << ","
         << format_double(mc.value) << "," << format_double(mc.std_error) << ","
         << format_double(rel) << "," << (pass ? 1 : 0) << "\n";
      log.info("case ", c, " ", kind, " K=", K, " D=", D, ": closed ", fmt(exact), ", MC ",
               fmt(mc.value), " +- ", fmt(mc.std_error, 3), " (rel ", fmt(rel, 3), ")");
    };
    emit("content", kl_content(kc.fused, build_joint(kc.params)),
         mc_kl_content(kc.fused, kc.params, n, rng));
    emit("style", kl_style(kc.style), mc_kl_style(kc.style, n, rng));
  }
  return log.verdict(all, "kl-validate",
                     "max relative error " + fmt(worst, 4) + " over " + std::to_string(opt.cases) +
                         " cases (tolerance " + fmt(tol) + ")");
}

int gradcheck(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  const std::size_t models = opt.n.value_or(20);
  if (models == 0) throw ConfigError("--n must be positive for gradcheck");
  prepare_out(opt);
  const GradcheckSuiteResult r = run_gradcheck_suite(cfg.seed, models);
  auto os = open_out(opt, "gradcheck.csv");
  os << "model,check,block,checked,max_rel_error,analytic,numeric\n";
  for (const auto& e : r.entries)
    os << e.model << "," << e.check << "," << e.block << "," << e.result.checked << ","
       << format_double(e.result.max_rel_error) << "," << format_double(e.result.analytic) << ","
       << format_double(e.result.numeric) << "\n";
  const GradcheckEntry& w = r.worst();
  log.info("gradcheck: ", r.entries.size(), " blocks over ", models, " models");
  return log.verdict(r.max_rel_error() < kGradcheckTolerance, "gradcheck",
                     "max relative error " + fmt(r.max_rel_error(), 3) + " at model " +
                         std::to_string(w.model) + " " + w.check + " " + w.block +
                         " (tolerance " + fmt(kGradcheckTolerance) + ")");
}

int gen_data(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  prepare_out(opt);
  const SynthDataset data = generate(cfg.synth);
  {
    auto os = open_out(opt, "source.csv");
    write_rows(os, data.source.x, data.source.y);
  }
  {
    auto os = open_out(opt, "target_train.csv");
    write_rows(os, data.target_train, std::vector<int>(data.target_train.size(), -1));
  }
  {
    auto os = open_out(opt, "target_test.csv");
    write_rows(os, data.target_test.x, data.target_test.y);
  }
  json anchors = json::array();
  for (std::size_t k = 0; k < data.anchors.rows(); ++k) {
    json row = json::array();
    for (double v : data.anchors.row(k)) row.push_back(v);
    anchors.push_back(row);
  }
  const SynthSpec& s = cfg.synth;
  const json meta = {
      {"format_version", 1},
      {"files", {{"source", "source.csv"}, {"target_train", "target_train.csv"}, {"target_test", "target_test.csv"}}},
      {"columns", "x0..x" + std::to_string(s.obs_dim - 1) + ",label"},
      {"hidden_label", -1},
      {"counts", {{"source", data.source.size()}, {"target_train", data.target_train.size()}, {"target_test", data.target_test.size()}}},
      {"spec",
       {{"num_classes", s.num_classes}, {"content_dim", s.content_dim}, {"style_dim", s.style_dim},
        {"obs_dim", s.obs_dim}, {"source_per_class", s.source_per_class},
        {"target_per_class", s.target_per_class}, {"test_per_class", s.test_per_class},
        {"domain_shift_scale", s.domain_shift_scale}, {"label_noise_rate", s.label_noise_rate},
        {"content_jitter", s.content_jitter}, {"obs_noise", s.obs_noise},
        {"content_gain", s.content_gain}, {"style_gain", s.style_gain}, {"seed", s.seed}}},
      {"anchors", anchors}};
  auto os = open_out(opt, "dataset.json");
  os << meta.dump(2) << "\n";
  log.info("gen-data: ", data.source.size(), " source, ", data.target_train.size(),
           " unlabeled target, ", data.target_test.size(), " target test rows in ", opt.out.string());
  return kOk;
}

int train(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  prepare_out(opt);
  const SynthDataset data = generate(cfg.synth);

  auto epochs_csv = open_out(opt, "epochs.csv");
  auto run_log = open_out(opt, "run_log.jsonl");
  run_log << json{{"event", "start"}, {"timestamp", iso_timestamp()},
                  {"prior_kind", prior_kind_name(cfg.train.prior_kind)},
                  {"sigma_rule", cfg.train.sigma_rule}, {"seed", cfg.train.seed},
                  {"data_seed", cfg.synth.seed}}
                 .dump()
          << "\n";
  epochs_csv << "epoch,round,ce,kl_content,kl_style_s,kl_style_t,l1_s,l1_t,adv_s,adv_t,dis_s,dis_t,"
                "target_accuracy,target_mae,target_qwk\n";
  auto on_epoch = [&](const EpochRecord& e) {
    const LossTerms& l = e.mean_losses;
    epochs_csv << e.epoch << "," << e.round;
    for (double v : {l.ce, l.kl_content, l.kl_style_s, l.kl_style_t, l.l1_s, l.l1_t, l.adv_s,
                     l.adv_t, l.dis_s, l.dis_t, e.target.accuracy, e.target.mae, e.target.qwk})
      epochs_csv << "," << format_double(v);
    epochs_csv << "\n";
    run_log << json{{"event", "epoch"}, {"epoch", e.epoch}, {"round", e.round},
                    {"losses", losses_json(l)}, {"target", scores_json(e.target)}}
                   .dump()
            << "\n";
    log.info("epoch ", e.epoch, " round ", e.round, ": ce ", fmt(l.ce, 4), " kl_c ",
             fmt(l.kl_content, 4), " l1 ", fmt(l.l1_s, 4), "/", fmt(l.l1_t, 4), " target qwk ",
             fmt(e.target.qwk, 4));
  };
  TrainResult result = self_training_loop(data, cfg.train, on_epoch);

  {
    auto os = open_out(opt, "rounds.csv");
    os << "round,portion,selected";
    for (std::size_t k = 0; k < result.model.num_classes(); ++k) os << ",count_" << k;
    os << ",empty_classes,target_accuracy,target_mae,target_qwk\n";
    for (const auto& r : result.rounds) {
      std::size_t total = 0;
      for (auto c : r.pseudo_counts) total += c;
      os << r.round << "," << format_double(r.portion) << "," << total;
      for (auto c : r.pseudo_counts) os << "," << c;
      os << "," << r.fallback_classes.size() << "," << format_double(r.target.accuracy) << ","
         << format_double(r.target.mae) << "," << format_double(r.target.qwk) << "\n";
    }
  }
  for (const auto& r : result.rounds)
    run_log << json{{"event", "round"}, {"round", r.round}, {"portion", r.portion},
                    {"pseudo_counts", r.pseudo_counts}, {"empty_classes", r.fallback_classes},
                    {"target", scores_json(r.target)}}
                   .dump()
            << "\n";
  const OrdinalScores source = evaluate(result.model, data.source);
  {
    auto os = open_out(opt, "metrics.csv");
    os << "split,accuracy,mae,qwk\n";
    os << "source_train," << format_double(source.accuracy) << "," << format_double(source.mae)
       << "," << format_double(source.qwk) << "\n";
    os << "target_test," << format_double(result.final_target.accuracy) << ","
       << format_double(result.final_target.mae) << "," << format_double(result.final_target.qwk)
       << "\n";
  }
  {
    auto os = open_out(opt, "prior.csv");
    const RcgParams& p = result.model.prior;
    os << "dim,class,mean,delta,sigma\n";
    const JointGaussianChain joint = build_joint(p);
    for (std::size_t d = 0; d < p.content_dim(); ++d)
      for (std::size_t k = 0; k < p.num_classes(); ++k)
        os << d << "," << k << "," << format_double(joint.mean[d][k]) << ","
           << format_double(k == 0 ? 0.0 : p.delta(d, k)) << "," << format_double(p.sigma(d, k))
           << "\n";
  }
  save_checkpoint(opt.out / "model.ckpt", result.model, cfg.train);
  {
    auto os = open_out(opt, "config.used");
    os << render_config(cfg);
  }
  run_log << json{{"event", "end"}, {"timestamp", iso_timestamp()},
                  {"source", scores_json(source)}, {"target_test", scores_json(result.final_target)}}
                 .dump()
          << "\n";
  log.info("train: target test accuracy ", fmt(result.final_target.accuracy, 4), ", MAE ",
           fmt(result.final_target.mae, 4), ", QWK ", fmt(result.final_target.qwk, 4),
           "; checkpoint ", (opt.out / "model.ckpt").string());
  return kOk;
}

int eval(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  const RunConfig cfg = resolve_config(opt);
  const fs::path ckpt = opt.checkpoint.value_or(opt.out / "model.ckpt");
  Model model = load_checkpoint(ckpt);
  const LabeledSet set = opt.data ? read_rows(*opt.data) : generate(cfg.synth).target_test;
  if (set.x.front().size() != model.obs_dim())
    throw ConfigError("data has " + std::to_string(set.x.front().size()) +
                      " features but the checkpoint expects " + std::to_string(model.obs_dim()));
  const std::size_t K = model.num_classes();
  for (int y : set.y)
    if (y >= static_cast<int>(K))
      throw ConfigError("label " + std::to_string(y) + " exceeds the checkpoint's " +
                        std::to_string(K) + " classes");
  prepare_out(opt);

  ConfusionMatrix conf(K);
  auto preds = open_out(opt, "predictions.csv");
  preds << "index,truth,predicted";
  for (std::size_t k = 0; k < K; ++k) preds << ",p" << k;
  preds << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Prediction p = predict(model.enc_c, model.cls, set.x[i]);
    conf.add(set.y[i], p.label);
    preds << i << "," << set.y[i] << "," << p.label;
    for (double v : p.probabilities) preds << "," << format_double(v);
    preds << "\n";
  }
  const OrdinalScores s = score(conf);
  {
    auto os = open_out(opt, "eval_metrics.csv");
    os << "count,accuracy,mae,qwk\n"
       << set.size() << "," << format_double(s.accuracy) << "," << format_double(s.mae) << ","
       << format_double(s.qwk) << "\n";
  }
  {
    auto os = open_out(opt, "confusion.csv");
    write_csv(os, conf.counts());
  }
  log.info("eval: ", set.size(), " samples, accuracy ", fmt(s.accuracy, 4), ", MAE ", fmt(s.mae, 4),
           ", QWK ", fmt(s.qwk, 4));
  return kOk;
}

int report(const Options& opt, std::ostream& out) {
  Log log(out, opt.quiet);
  RunConfig cfg = resolve_config(opt);
  if (opt.seed) {
    // --seed shifts the whole seed list so the seed count stays as configured.
    for (std::size_t i = 0; i < cfg.compare.seeds.size(); ++i) cfg.compare.seeds[i] = *opt.seed + i;
  }
  prepare_out(opt);
  std::vector<ArmSpec> arms = standard_arms(cfg.train);
  if (opt.ablation) {
    for (const char* name : {"rcg_3sigma", "rcg_2sigma"}) {
      const auto it = std::find_if(arms.begin(), arms.end(),
                                   [&](const ArmSpec& a) { return a.name == name; });
      arms.push_back({it->name + "_no_adv", without_adversarial(it->cfg)});
    }
  }
  const ComparisonReport rep = run_comparison(cfg.synth, arms, cfg.compare.seeds, threads_from_env());
  {
    auto os = open_out(opt, "comparison.csv");
    write_comparison_csv(os, rep);
  }
  {
    auto os = open_out(opt, "comparison.md");
    write_comparison_markdown(os, rep, cfg.synth);
  }
  for (const auto& a : rep.arms)
    log.info(a.name, ": median accuracy ", fmt(a.median.accuracy, 4), ", MAE ",
             fmt(a.median.mae, 4), ", QWK ", fmt(a.median.qwk, 4));
  return kOk;
}

}  // namespace rcg::cli
