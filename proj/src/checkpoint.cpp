#include "rcg/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "rcg/error.hpp"

namespace rcg {

namespace {

struct Arch {
  std::size_t obs_dim = 0;
  std::size_t num_classes = 0;
  TrainConfig cfg;
};

}  // namespace

void write_checkpoint(std::ostream& os, Model& model, const TrainConfig& cfg) {
  os << "rcg-checkpoint " << kCheckpointVersion << "\n";
  os << "arch obs_dim=" << model.obs_dim() << " num_classes=" << model.num_classes()
     << " content_dim=" << model.enc_c.latent_dim() << " style_dim=" << model.enc_u_s.latent_dim()
     << " encoder_hidden=" << cfg.encoder_hidden << " classifier_hidden=" << cfg.classifier_hidden
     << " discriminator_hidden=" << cfg.discriminator_hidden
     << " sigma_rule=" << format_double(model.prior.sigma_rule()) << "\n";
  for (const ParamBlock& b : model.blocks()) {
    os << "block " << b.name << " " << b.values.size() << "\n";
    for (double v : b.values) os << format_double(v) << "\n";
  }
  os << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const TrainConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write checkpoint " + path.string());
  write_checkpoint(os, model, cfg);
  if (!os) throw ConfigError("error while writing checkpoint " + path.string());
}

Model read_checkpoint(std::istream& is, TrainConfig* cfg_out) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "rcg-checkpoint")
    throw ConfigError("checkpoint: missing 'rcg-checkpoint' header");
  if (version != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));

  std::string word;
  if (!(is >> word) || word != "arch") throw ConfigError("checkpoint: missing arch line");
  std::string rest;
  std::getline(is, rest);
  std::map<std::string, std::string> fields;
  std::istringstream ls(rest);
  for (std::string kv; ls >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("checkpoint: malformed arch field '" + kv + "'");
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto field = [&](const char* name) -> const std::string& {
    const auto it = fields.find(name);
    if (it == fields.end()) throw ConfigError(std::string("checkpoint: arch lacks ") + name);
    return it->second;
  };
  Arch a;
  try {
    a.obs_dim = std::stoul(field("obs_dim"));
    a.num_classes = std::stoul(field("num_classes"));
    a.cfg.content_dim = std::stoul(field("content_dim"));
    a.cfg.style_dim = std::stoul(field("style_dim"));
    a.cfg.encoder_hidden = std::stoul(field("encoder_hidden"));
    a.cfg.classifier_hidden = std::stoul(field("classifier_hidden"));
    a.cfg.discriminator_hidden = std::stoul(field("discriminator_hidden"));
    a.cfg.sigma_rule = std::stod(field("sigma_rule"));
  } catch (const std::logic_error&) {
    throw ConfigError("checkpoint: non-numeric arch field");
  }

  Rng scratch(0);
  Model model = Model::create(a.obs_dim, a.num_classes, a.cfg, scratch);
  for (const ParamBlock& b : model.blocks()) {
    std::string name;
    std::size_t count = 0;
    if (!(is >> word >> name >> count) || word != "block")
      throw ConfigError("checkpoint: expected block " + b.name);
    if (name != b.name || count != b.values.size())
      throw ConfigError("checkpoint: block " + name + " (" + std::to_string(count) +
                        ") does not match expected " + b.name + " (" +
                        std::to_string(b.values.size()) + ")");
    for (double& v : b.values) {
      std::string tok;
      if (!(is >> tok)) throw ConfigError("checkpoint: truncated block " + name);
      try {
        v = std::stod(tok);
      } catch (const std::logic_error&) {
        throw ConfigError("checkpoint: bad value '" + tok + "' in block " + name);
      }
    }
  }
  if (!(is >> word) || word != "end") throw ConfigError("checkpoint: missing end marker");

  if (cfg_out) {
    cfg_out->content_dim = a.cfg.content_dim;
    cfg_out->style_dim = a.cfg.style_dim;
    cfg_out->encoder_hidden = a.cfg.encoder_hidden;
    cfg_out->classifier_hidden = a.cfg.classifier_hidden;
    cfg_out->discriminator_hidden = a.cfg.discriminator_hidden;
    cfg_out->sigma_rule = a.cfg.sigma_rule;
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open checkpoint " + path.string());
  return read_checkpoint(is, cfg);
}

}  // namespace rcg
