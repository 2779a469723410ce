#include <sstream>

#include <gtest/gtest.h>

#include "rcg/config.hpp"
#include "rcg/error.hpp"

using rcg::parse_config;

namespace {

rcg::RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const rcg::ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const auto c = parse("");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.prior.num_classes, 5u);
  EXPECT_DOUBLE_EQ(c.train.alpha, 1.0);
  EXPECT_DOUBLE_EQ(c.train.beta, 0.5);
  EXPECT_EQ(c.synth.obs_dim, 32u);
  EXPECT_EQ(c.compare.seeds.size(), 5u);
}

TEST(Config, ParsesSectionsAndComments) {
  const auto c = parse(
      "# run\n"
      "format_version = 1\n"
      "seed = 42\n"
      "\n"
      "[train]\n"
      "prior_kind = \"iid_gaussian\"\n"
      "adversarial_enabled = false\n"
      "portions = [0.1, 0.4]\n"
      "[synth]\n"
      "label_noise_rate = 0.15\n"
      "[prior]\n"
      "num_classes = 3\n"
      "content_dim = 2\n"
      "delta = [[1, 2], [3, 4]]\n"
      "sigma = 0.2\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.prior_kind, rcg::PriorKind::iid_gaussian);
  EXPECT_FALSE(c.train.adversarial_enabled);
  EXPECT_EQ(c.train.portions, (std::vector<double>{0.1, 0.4}));
  EXPECT_DOUBLE_EQ(c.synth.label_noise_rate, 0.15);
  const auto p = c.prior.params();
  EXPECT_NEAR(p.delta(1, 2), 4.0, 1e-12);
  EXPECT_NEAR(p.sigma(0, 1), 0.2, 1e-12);
}

TEST(Config, RoundTripsThroughRender) {
  auto c = parse("[train]\nalpha = 0.25\nrounds = 7\n[prior]\nmu1 = [0.5, 1, 2, 3]\n");
  c.override_seed(9);
  const auto back = parse(rcg::render_config(c));
  EXPECT_EQ(rcg::render_config(back), rcg::render_config(c));
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.train.seed, 9u);
  EXPECT_EQ(back.synth.seed, 9u);
  EXPECT_DOUBLE_EQ(back.train.alpha, 0.25);
}

TEST(Config, ErrorsNameFileLineAndKey) {
  EXPECT_EQ(error_of("[train]\nbogus = 1\n"), "test.cfg:2: train.bogus: unknown key");
  EXPECT_NE(error_of("[nope]\n").find("test.cfg:1"), std::string::npos);
  EXPECT_NE(error_of("[train]\nalpha = 1\nalpha = 2\n").find("train.alpha"), std::string::npos);
  EXPECT_NE(error_of("[train]\nrounds = \"three\"\n").find("train.rounds"), std::string::npos);
  EXPECT_NE(error_of("format_version = 2\n").find("format_version"), std::string::npos);
  EXPECT_NE(error_of("[train]\nalpha\n").find("test.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("[synth]\nlabel_noise_rate = 0.7\n"), "");
}

TEST(Config, PriorRuleViolationRejected) {
  const auto c = parse("[prior]\nsigma_rule = 3\ndelta = 1\nsigma = 0.5\n");
  EXPECT_THROW(c.prior.params(), rcg::ConfigError);
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(rcg::load_config("/nonexistent/run.cfg"), rcg::ConfigError);
}
