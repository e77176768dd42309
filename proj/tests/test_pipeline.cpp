#include <gtest/gtest.h>

#include <set>

#include "clf/pipeline.hpp"

using namespace clf;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.dataset.location_segments = {10, 40};
  c.dataset.repetitions = 2;
  c.gbdt.n_trees = 10;
  c.cnn.epochs = 1;
  c.cnn.frame_stride = 6;
  return c;
}

std::vector<Trial> tiny_dataset(const RunConfig& c) { return make_paper_shaped_dataset(c.synth, c.seed, c.dataset); }

}  // namespace

TEST(DeriveSeed, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint32_t s = 0; s < 3; ++s)
    for (std::uint64_t i = 0; i < 20; ++i) seen.insert(derive_seed(7, s, i));
  EXPECT_EQ(seen.size(), 60u);
  EXPECT_EQ(derive_seed(7, 1, 3), derive_seed(7, 1, 3));
  EXPECT_NE(derive_seed(7, 1, 3), derive_seed(8, 1, 3));
}

TEST(LocalizerDataset, ContactFramesOnlyWithStride) {
  const RunConfig c = tiny_config();
  const auto trials = tiny_dataset(c);
  std::size_t contact = 0;
  for (const auto& t : trials)
    for (double f : t.gt_force_N) contact += f >= 0.01;
  EXPECT_EQ(build_localizer_dataset(trials, 2.0, 0.01, 1).size(), contact);
  const auto strided = build_localizer_dataset(trials, 2.0, 0.01, 3);
  EXPECT_LT(strided.size(), contact / 2);
  for (const auto& s : strided) EXPECT_GE(*std::max_element(s.target.begin(), s.target.end()), 0.0);
  EXPECT_THROW(build_localizer_dataset(trials, 2.0, 0.01, 0), DomainError);
}

TEST(Detector, SaveLoadGivesIdenticalScores) {
  const RunConfig c = tiny_config();
  const auto trials = tiny_dataset(c);
  const Detector d = train_detector(trials, c, 3);
  const std::string path = testing::TempDir() + "clf_detector.json";
  d.save(path);
  const Detector back = Detector::load(path);
  EXPECT_EQ(back.k(), d.k());
  for (const auto& t : trials) EXPECT_EQ(back.scores(t), d.scores(t));
  EXPECT_THROW(Detector::load("/nonexistent/detector.json"), IoError);
}

TEST(Localizer, SaveLoadGivesIdenticalPredictions) {
  const RunConfig c = tiny_config();
  const auto trials = tiny_dataset(c);
  const Localizer loc = train_localizer(trials, c, 4);
  const std::string path = testing::TempDir() + "clf_localizer.ckpt";
  loc.save(path);
  const Localizer back = Localizer::load(path);
  const std::vector<std::size_t> frames{0, 10, trials[0].size() - 1};
  EXPECT_EQ(back.predict(trials[0], frames), loc.predict(trials[0], frames));
  // Batching must not change eval-mode outputs.
  const auto one_by_one = loc.predict(trials[0], frames, 1);
  const auto batched = loc.predict(trials[0], frames, 256);
  for (std::size_t i = 0; i < frames.size(); ++i)
    for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(one_by_one[i][j], batched[i][j], 1e-5);
}

TEST(CrossValidate, IndependentOfJobs) {
  const RunConfig c = tiny_config();
  const auto trials = tiny_dataset(c);
  const EvalReport a = cross_validate(trials, c, 1);
  const EvalReport b = cross_validate(trials, c, 3);
  ASSERT_EQ(a.rows.size(), 4u);
  EXPECT_EQ(report_csv(a), report_csv(b));
  EXPECT_EQ(samples_csv(a), samples_csv(b));
  EXPECT_EQ(a.rows[0].test_id, "cv_1");
  EXPECT_EQ(a.rows[3].test_id, "cc_2");
}
