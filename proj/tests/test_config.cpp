#include <gtest/gtest.h>

#include "voxgan/config.hpp"

using namespace voxgan;

TEST(Config, DefaultsMirrorTrainingRecipe) {
  const RunConfig c;
  EXPECT_EQ(c.n_filters, 128);
  EXPECT_EQ(c.reals_per_phase, 1'000'000);
  EXPECT_EQ(c.lr_table, (std::vector<double>{3e-4, 3e-4, 6e-4, 6e-4}));
  ASSERT_TRUE(c.late_lr.has_value());
  EXPECT_DOUBLE_EQ(c.late_lr->rate, 1e-4);
  EXPECT_EQ(c.augment_k, 10);
  EXPECT_DOUBLE_EQ(c.augment_sigma, 10.0);
  EXPECT_EQ(c.crop, (Dims3{128, 128, 128}));
  EXPECT_EQ(c.target_stage, 3);
  EXPECT_FALSE(c.seed.has_value());
}

TEST(Config, ParsesCommentsListsAndOverrides) {
  const RunConfig c = parse_config(
      "# comment\n"
      "seed = 42   # trailing\n"
      "\n"
      "batch_sizes = 8, 4\n"
      "lr_table = 1e-3,2e-3\n"
      "late_lr = none\n"
      "crop = 64,64,32\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.batch_sizes, (std::vector<int>{8, 4}));
  EXPECT_EQ(c.lr_table, (std::vector<double>{1e-3, 2e-3}));
  EXPECT_FALSE(c.late_lr.has_value());
  EXPECT_EQ(c.crop, (Dims3{64, 64, 32}));
  RunConfig d = c;
  set_config_value(d, "late_lr", "5e-5");
  set_config_value(d, "late_lr_fraction", "0.5");
  ASSERT_TRUE(d.late_lr.has_value());
  EXPECT_DOUBLE_EQ(d.late_lr->rate, 5e-5);
  EXPECT_DOUBLE_EQ(d.late_lr->fraction, 0.5);
}

TEST(Config, RenderParsesBackToSameConfig) {
  RunConfig c;
  c.seed = 7;
  c.lr_table = {1.0 / 3.0, 2e-4};
  c.out_dir = "runs/a";
  const std::string text = render_config(c);
  EXPECT_EQ(render_config(parse_config(text)), text);
  RunConfig unset;
  EXPECT_NE(render_config(unset).find("# seed is unset"), std::string::npos);
}

TEST(Config, AllProblemsReportedTogether) {
  try {
    parse_config("bogus = 1\nseed = x\nn_filters\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.problems().size(), 3u);
    EXPECT_NE(e.problems()[0].find("line 1"), std::string::npos);
    EXPECT_NE(e.problems()[2].find("line 3"), std::string::npos);
  }
}

TEST(Config, ValidationCatchesRanges) {
  RunConfig c;
  EXPECT_THROW(validate_config(c), ConfigError);  // seed missing
  c.seed = 1;
  EXPECT_NO_THROW(validate_config(c));
  c.n_filters = 0;
  c.adam_beta2 = 1.0;
  c.batch_sizes = {};
  c.augment_k = 0;
  EXPECT_GE(config_problems(c).size(), 4u);
}

TEST(Config, TrainConfigCarriesEveryKnob) {
  RunConfig c;
  c.seed = 9;
  c.target_stage = 2;
  c.gp_lambda = 5;
  c.adam_beta2 = 0.9;
  c.checkpoint_every = 11;
  const TrainConfig t = to_train_config(c);
  EXPECT_EQ(t.seed, 9u);
  EXPECT_EQ(t.schedule.target_stage, 2);
  EXPECT_DOUBLE_EQ(t.loss.gp_lambda, 5);
  EXPECT_DOUBLE_EQ(t.adam.beta2, 0.9);
  EXPECT_EQ(t.checkpoint_every, 11);
  EXPECT_EQ(t.schedule.reals_per_phase, 1'000'000);
}
