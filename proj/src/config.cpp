#include "rcg/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rcg/error.hpp"

namespace rcg {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Where {
  std::string key;  // section.key
  std::string at;   // file:line
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(at + ": " + key + ": " + what);
  }
};

double as_real(const json& v, const Where& w) {
  if (!v.is_number()) w.fail("expected a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const Where& w) {
  if (!v.is_number_integer() || v.get<long long>() < 0) w.fail("expected a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t as_seed(const json& v, const Where& w) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    w.fail("expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const Where& w) {
  if (!v.is_boolean()) w.fail("expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const Where& w) {
  if (!v.is_string()) w.fail("expected a quoted string");
  return v.get<std::string>();
}

std::vector<double> as_reals(const json& v, const Where& w) {
  if (!v.is_array()) w.fail("expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, w));
  return out;
}

std::vector<std::vector<double>> as_rows(const json& v, const Where& w) {
  if (!v.is_array()) w.fail("expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (const auto& row : v) out.push_back(as_reals(row, w));
  return out;
}

using Setter = std::function<void(RunConfig&, const json&, const Where&)>;

// Scalar broadcasts are expanded after the whole file is read, once K and D
// are known; they are parked here meanwhile.
struct Pending {
  std::optional<double> mu1, delta, sigma;
};

std::map<std::string, Setter> setters(Pending& pending) {
  std::map<std::string, Setter> s;
  s["format_version"] = [](RunConfig& c, const json& v, const Where& w) {
    c.format_version = static_cast<int>(as_count(v, w));
  };
  s["seed"] = [](RunConfig& c, const json& v, const Where& w) { c.seed = as_seed(v, w); };

  s["prior.num_classes"] = [](RunConfig& c, const json& v, const Where& w) {
    c.prior.num_classes = as_count(v, w);
  };
  s["prior.content_dim"] = [](RunConfig& c, const json& v, const Where& w) {
    c.prior.content_dim = as_count(v, w);
  };
  s["prior.sigma_rule"] = [](RunConfig& c, const json& v, const Where& w) {
    c.prior.sigma_rule = as_real(v, w);
  };
  s["prior.mu1"] = [&pending](RunConfig& c, const json& v, const Where& w) {
    if (v.is_number()) pending.mu1 = as_real(v, w);
    else c.prior.mu1 = as_reals(v, w);
  };
  s["prior.delta"] = [&pending](RunConfig& c, const json& v, const Where& w) {
    if (v.is_number()) pending.delta = as_real(v, w);
    else c.prior.delta = as_rows(v, w);
  };
  s["prior.sigma"] = [&pending](RunConfig& c, const json& v, const Where& w) {
    if (v.is_number()) pending.sigma = as_real(v, w);
    else c.prior.sigma = as_rows(v, w);
  };

#define RCG_REAL(sec, field)                                                  \
  s[#sec "." #field] = [](RunConfig& c, const json& v, const Where& w) {      \
    c.sec.field = as_real(v, w);                                              \
  }
#define RCG_COUNT(sec, field)                                                 \
  s[#sec "." #field] = [](RunConfig& c, const json& v, const Where& w) {      \
    c.sec.field = as_count(v, w);                                             \
  }
#define RCG_BOOL(sec, field)                                                  \
  s[#sec "." #field] = [](RunConfig& c, const json& v, const Where& w) {      \
    c.sec.field = as_bool(v, w);                                              \
  }
  RCG_REAL(train, alpha);
  RCG_REAL(train, lambda);
  RCG_REAL(train, theta);
  RCG_REAL(train, beta);
  RCG_REAL(train, gamma);
  RCG_REAL(train, ce_weight);
  RCG_REAL(train, sigma_rule);
  RCG_BOOL(train, adversarial_enabled);
  RCG_BOOL(train, learn_prior);
  RCG_COUNT(train, content_dim);
  RCG_COUNT(train, style_dim);
  RCG_COUNT(train, encoder_hidden);
  RCG_COUNT(train, classifier_hidden);
  RCG_COUNT(train, discriminator_hidden);
  RCG_COUNT(train, source_epochs);
  RCG_COUNT(train, rounds);
  RCG_COUNT(train, epochs_per_round);
  RCG_COUNT(train, group_source);
  RCG_COUNT(train, group_target);
  RCG_REAL(train, learning_rate);
  s["train.prior_kind"] = [](RunConfig& c, const json& v, const Where& w) {
    try {
      c.train.prior_kind = parse_prior_kind(as_string(v, w));
    } catch (const InvalidArgument& e) {
      w.fail(e.what());
    }
  };
  s["train.portions"] = [](RunConfig& c, const json& v, const Where& w) {
    c.train.portions = as_reals(v, w);
  };
  s["train.seed"] = [](RunConfig& c, const json& v, const Where& w) {
    c.train.seed = as_seed(v, w);
  };

  RCG_COUNT(synth, num_classes);
  RCG_COUNT(synth, content_dim);
  RCG_COUNT(synth, style_dim);
  RCG_COUNT(synth, obs_dim);
  RCG_COUNT(synth, source_per_class);
  RCG_COUNT(synth, target_per_class);
  RCG_COUNT(synth, test_per_class);
  RCG_REAL(synth, domain_shift_scale);
  RCG_REAL(synth, label_noise_rate);
  RCG_REAL(synth, content_jitter);
  RCG_REAL(synth, obs_noise);
  RCG_REAL(synth, content_gain);
  RCG_REAL(synth, style_gain);
  s["synth.seed"] = [](RunConfig& c, const json& v, const Where& w) {
    c.synth.seed = as_seed(v, w);
  };
#undef RCG_REAL
#undef RCG_COUNT
#undef RCG_BOOL

  s["compare.seeds"] = [](RunConfig& c, const json& v, const Where& w) {
    if (!v.is_array() || v.empty()) w.fail("expected a non-empty array of seeds");
    c.compare.seeds.clear();
    for (const auto& e : v) c.compare.seeds.push_back(as_seed(e, w));
  };
  return s;
}

const std::set<std::string> kSections{"prior", "train", "synth", "compare"};

void check_shape(const std::vector<std::vector<double>>& rows, std::size_t D, std::size_t K,
                 const char* key) {
  if (rows.empty()) return;
  bool ok = rows.size() == D;
  for (const auto& r : rows) ok = ok && r.size() == K - 1;
  if (!ok)
    throw ConfigError("prior." + std::string(key) + ": expected " + std::to_string(D) +
                      " rows of " + std::to_string(K - 1) + " values");
}

}  // namespace

RcgParams PriorSpec::params() const {
  const std::size_t K = num_classes;
  const std::size_t D = content_dim;
  if (K < 2 || D == 0) throw ConfigError("prior: num_classes must be >= 2 and content_dim > 0");
  if (!(sigma_rule > 0.0)) throw ConfigError("prior.sigma_rule: must be positive");
  if (!mu1.empty() && mu1.size() != D)
    throw ConfigError("prior.mu1: expected " + std::to_string(D) + " values");
  check_shape(delta, D, K, "delta");
  check_shape(sigma, D, K, "sigma");
  const std::vector<double> m = mu1.empty() ? std::vector<double>(D, 0.0) : mu1;
  const auto d = delta.empty() ? std::vector<std::vector<double>>(D, std::vector<double>(K - 1, 3.0))
                               : delta;
  const auto s = sigma.empty() ? std::vector<std::vector<double>>(D, std::vector<double>(K - 1, 1.0))
                               : sigma;
  try {
    return RcgParams::from_constrained(K, D, sigma_rule, m, d, s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
}

void RunConfig::override_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  synth.seed = s;
}

RunConfig parse_config(std::istream& in, const std::string& source_name) {
  RunConfig cfg;
  Pending pending;
  const auto table = setters(pending);
  std::set<std::string> seen;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  bool saw_version = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string at = source_name + ":" + std::to_string(line_no);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(at + ": malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (!kSections.count(section)) throw ConfigError(at + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(at + ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    const Where where{full, at};
    const auto it = table.find(full);
    if (it == table.end()) where.fail("unknown key");
    if (!seen.insert(full).second) where.fail("duplicate key");

    json value;
    try {
      value = json::parse(trim(t.substr(eq + 1)));
    } catch (const json::parse_error&) {
      where.fail("value is not a valid literal: '" + trim(t.substr(eq + 1)) + "'");
    }
    it->second(cfg, value, where);
    if (full == "format_version") saw_version = true;
  }

  if (saw_version && cfg.format_version != kConfigFormatVersion)
    throw ConfigError(source_name + ": format_version " + std::to_string(cfg.format_version) +
                      " is not supported (expected " + std::to_string(kConfigFormatVersion) + ")");

  const std::size_t K = cfg.prior.num_classes;
  const std::size_t D = cfg.prior.content_dim;
  if (pending.mu1) cfg.prior.mu1.assign(D, *pending.mu1);
  if (pending.delta) cfg.prior.delta.assign(D, std::vector<double>(K > 0 ? K - 1 : 0, *pending.delta));
  if (pending.sigma) cfg.prior.sigma.assign(D, std::vector<double>(K > 0 ? K - 1 : 0, *pending.sigma));

  try {
    cfg.train.validate();
    cfg.synth.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (cfg.train.content_dim == 0) throw ConfigError(source_name + ": train.content_dim must be positive");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

namespace {

std::string lit(double v) { return format_double(v); }

std::string lit(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + lit(v[i]);
  return s + "]";
}

std::string lit(const std::vector<std::vector<double>>& rows) {
  std::string s = "[";
  for (std::size_t i = 0; i < rows.size(); ++i) s += (i ? ", " : "") + lit(rows[i]);
  return s + "]";
}

}  // namespace

std::string render_config(const RunConfig& c) {
  std::ostringstream os;
  os << "format_version = " << c.format_version << "\n";
  os << "seed = " << c.seed << "\n\n";

  os << "[prior]\n";
  os << "num_classes = " << c.prior.num_classes << "\n";
  os << "content_dim = " << c.prior.content_dim << "\n";
  os << "sigma_rule = " << lit(c.prior.sigma_rule) << "\n";
  if (!c.prior.mu1.empty()) os << "mu1 = " << lit(c.prior.mu1) << "\n";
  if (!c.prior.delta.empty()) os << "delta = " << lit(c.prior.delta) << "\n";
  if (!c.prior.sigma.empty()) os << "sigma = " << lit(c.prior.sigma) << "\n";

  const TrainConfig& t = c.train;
  os << "\n[train]\n";
  os << "prior_kind = \"" << prior_kind_name(t.prior_kind) << "\"\n";
  os << "alpha = " << lit(t.alpha) << "\n";
  os << "lambda = " << lit(t.lambda) << "\n";
  os << "theta = " << lit(t.theta) << "\n";
  os << "beta = " << lit(t.beta) << "\n";
  os << "gamma = " << lit(t.gamma) << "\n";
  os << "ce_weight = " << lit(t.ce_weight) << "\n";
  os << "sigma_rule = " << lit(t.sigma_rule) << "\n";
  os << "adversarial_enabled = " << (t.adversarial_enabled ? "true" : "false") << "\n";
  os << "learn_prior = " << (t.learn_prior ? "true" : "false") << "\n";
  os << "content_dim = " << t.content_dim << "\n";
  os << "style_dim = " << t.style_dim << "\n";
  os << "encoder_hidden = " << t.encoder_hidden << "\n";
  os << "classifier_hidden = " << t.classifier_hidden << "\n";
  os << "discriminator_hidden = " << t.discriminator_hidden << "\n";
  os << "source_epochs = " << t.source_epochs << "\n";
  os << "rounds = " << t.rounds << "\n";
  os << "epochs_per_round = " << t.epochs_per_round << "\n";
  os << "group_source = " << t.group_source << "\n";
  os << "group_target = " << t.group_target << "\n";
  os << "portions = " << lit(t.portions) << "\n";
  os << "learning_rate = " << lit(t.learning_rate) << "\n";
  os << "seed = " << t.seed << "\n";

  const SynthSpec& s = c.synth;
  os << "\n[synth]\n";
  os << "num_classes = " << s.num_classes << "\n";
  os << "content_dim = " << s.content_dim << "\n";
  os << "style_dim = " << s.style_dim << "\n";
  os << "obs_dim = " << s.obs_dim << "\n";
  os << "source_per_class = " << s.source_per_class << "\n";
  os << "target_per_class = " << s.target_per_class << "\n";
  os << "test_per_class = " << s.test_per_class << "\n";
  os << "domain_shift_scale = " << lit(s.domain_shift_scale) << "\n";
  os << "label_noise_rate = " << lit(s.label_noise_rate) << "\n";
  os << "content_jitter = " << lit(s.content_jitter) << "\n";
  os << "obs_noise = " << lit(s.obs_noise) << "\n";
  os << "content_gain = " << lit(s.content_gain) << "\n";
  os << "style_gain = " << lit(s.style_gain) << "\n";
  os << "seed = " << s.seed << "\n";

  os << "\n[compare]\nseeds = [";
  for (std::size_t i = 0; i < c.compare.seeds.size(); ++i)
    os << (i ? ", " : "") << c.compare.seeds[i];
  os << "]\n";
  return os.str();
}

}  // namespace rcg
