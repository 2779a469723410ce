#include <sstream>

#include <gtest/gtest.h>

#include "rcg/checkpoint.hpp"
#include "rcg/error.hpp"

namespace {

rcg::TrainConfig small() {
  rcg::TrainConfig cfg;
  cfg.content_dim = 3;
  cfg.style_dim = 2;
  cfg.encoder_hidden = 5;
  cfg.classifier_hidden = 4;
  cfg.discriminator_hidden = 3;
  cfg.sigma_rule = 2.0;
  return cfg;
}

}  // namespace

TEST(Checkpoint, RoundTripsEveryValueExactly) {
  const auto cfg = small();
  rcg::Rng rng(3);
  auto model = rcg::Model::create(7, 4, cfg, rng);
  for (auto& b : model.blocks())
    for (double& v : b.values) v = rng.normal() / 3.0;
  std::stringstream ss;
  rcg::write_checkpoint(ss, model, cfg);

  rcg::TrainConfig loaded_cfg;
  auto loaded = rcg::read_checkpoint(ss, &loaded_cfg);
  EXPECT_EQ(loaded_cfg.content_dim, 3u);
  EXPECT_EQ(loaded_cfg.encoder_hidden, 5u);
  EXPECT_DOUBLE_EQ(loaded_cfg.sigma_rule, 2.0);
  const auto a = model.blocks();
  const auto b = loaded.blocks();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].values.size(), b[i].values.size());
    for (std::size_t j = 0; j < a[i].values.size(); ++j) ASSERT_EQ(a[i].values[j], b[i].values[j]);
  }
  const rcg::Vector x(7, 0.3);
  EXPECT_EQ(rcg::predict(model.enc_c, model.cls, x).probabilities,
            rcg::predict(loaded.enc_c, loaded.cls, x).probabilities);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto cfg = small();
  rcg::Rng rng(4);
  auto model = rcg::Model::create(7, 4, cfg, rng);
  std::stringstream ss;
  rcg::write_checkpoint(ss, model, cfg);
  const std::string text = ss.str();

  auto fails = [](const std::string& t) {
    std::istringstream in(t);
    EXPECT_THROW(rcg::read_checkpoint(in), rcg::ConfigError);
  };
  fails("rcg-checkpoint 99\n" + text.substr(text.find('\n') + 1));
  fails(text.substr(0, text.size() / 2));
  std::string renamed = text;
  renamed.replace(renamed.find("block ") + 6, 5, "xxxxx");
  fails(renamed);
  fails("");
}

TEST(Checkpoint, MissingFileIsConfigError) {
  EXPECT_THROW(rcg::load_checkpoint("/nonexistent/model.ckpt"), rcg::ConfigError);
}
