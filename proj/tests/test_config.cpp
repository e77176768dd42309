#include <gtest/gtest.h>

#include <fstream>

#include "clf/config.hpp"

using namespace clf;
using nlohmann::json;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.cnn.epochs = 3;
  c.cnn.arch.dropout = 0.25;
  c.gbdt.class_weights = std::pair{1.0, 4.0};
  c.dataset.no_contact_trials = 2;
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.cnn.arch.dropout, 0.25);
}

TEST(Config, PartialOverrides) {
  const RunConfig c = config_from_json(json::parse(R"({"gbdt": {"n_trees": 12}, "cnn": {"arch": {"dropout": 0.0}}})"));
  EXPECT_EQ(c.gbdt.n_trees, 12);
  EXPECT_EQ(c.gbdt.max_depth, 3);
  EXPECT_EQ(c.cnn.arch.dropout, 0.0);
  EXPECT_EQ(c.cnn.arch.conv[2].out_channels, 64);
}

TEST(Config, UnknownKeysRejected) {
  for (const char* text : {R"({"sed": 1})", R"({"gbdt": {"trees": 3}})", R"({"cnn": {"arch": {"kernel": 3}}})",
                           R"({"paths": {"data": "x"}})"}) {
    EXPECT_THROW(config_from_json(json::parse(text)), ConfigError) << text;
  }
  try {
    config_from_json(json::parse(R"({"gbdt": {"trees": 3}})"));
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gbdt.trees"), std::string::npos);
  }
}

TEST(Config, WrongTypesAndBadValuesRejected) {
  EXPECT_THROW(config_from_json(json::parse(R"({"jobs": "many"})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"jobs": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"features": {"k": 1000}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"grid": {"n_nodes": 100}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"gbdt": {"class_weights": [1]}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse("[]")), ConfigError);
}

TEST(Config, SigmaDefaultsToSegmentLength) {
  RunConfig c;
  EXPECT_EQ(c.cnn.sigma(c.grid()), c.grid().segment_len_mm());
  c.cnn.sigma_mm = 1.5;
  EXPECT_EQ(c.cnn.sigma(c.grid()), 1.5);
}

TEST(Config, CheckedInDefaultsMatchBuiltIns) {
  const RunConfig c = load_config(std::string(CLF_SOURCE_DIR) + "/configs/paper.default");
  EXPECT_EQ(to_json(c), to_json(RunConfig{}));
}

TEST(Config, LoadErrors) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
  const std::string path = testing::TempDir() + "clf_bad_config.json";
  std::ofstream(path) << "{ \"seed\": 1, // comment\n ";
  EXPECT_THROW(load_config(path), ConfigError);
  std::ofstream(path) << "{ // comments are allowed\n \"seed\": 5 }\n";
  EXPECT_EQ(load_config(path).seed, 5u);
}
