#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "clf/features.hpp"
#include "clf/synth.hpp"

using namespace clf;

TEST(LabelContact, ThresholdBoundary) {
  EXPECT_EQ(label_contact(0.009), 0);
  EXPECT_EQ(label_contact(0.010), 1);
  EXPECT_EQ(label_contact(0.10), 1);
  EXPECT_EQ(label_contact(0.0), 0);
  EXPECT_EQ(label_contact(std::nextafter(0.01, 0.0)), 0);
  EXPECT_THROW(label_contact(-1e-9), DomainError);
}

TEST(Downsample, Examples) {
  const std::vector<double> a{0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(downsample(a, 4), (std::vector<double>{0.5, 2.5, 4.5, 6.5}));
  const std::vector<double> b{1, 2, 3, 4, 5};
  EXPECT_EQ(downsample(b, 2), (std::vector<double>{2.0, 4.5}));
  const std::vector<double> c(263, 3.25);
  for (int k : {1, 7, 32, 263}) {
    for (double v : downsample(c, k)) EXPECT_DOUBLE_EQ(v, 3.25);
  }
}

TEST(Downsample, RangeErrors) {
  const std::vector<double> v(10, 1.0);
  EXPECT_THROW(downsample(v, 0), DomainError);
  EXPECT_THROW(downsample(v, 11), DomainError);
}

TEST(Downsample, IdentityAtFullResolution) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> v(263);
  for (double& x : v) x = n(rng);
  EXPECT_EQ(downsample(v, 263), v);
}

TEST(Downsample, SegmentSizesAndSumPreservation) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> v(263);
  for (double& x : v) x = n(rng);
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (int k = 1; k <= 263; ++k) {
    const auto sizes = segment_sizes(263, k);
    ASSERT_EQ(static_cast<int>(sizes.size()), k);
    EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), 0), 263);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1);
    // Leading segments are the longer ones.
    EXPECT_TRUE(std::is_sorted(sizes.rbegin(), sizes.rend()));
    const auto d = downsample(v, k);
    double s = 0;
    for (int j = 0; j < k; ++j) s += d[static_cast<std::size_t>(j)] * sizes[static_cast<std::size_t>(j)];
    EXPECT_NEAR(s, total, 1e-10);
  }
}

TEST(DetectionDataset, CountsAndLabels) {
  SynthConfig c;
  c.contact_s_mm = 50.0;
  Trial a = simulate_trial(c);
  c.contact_s_mm.reset();
  c.test_id = "nc_1";
  Trial b = simulate_trial(c);
  a.frames.resize(100);
  a.gt_force_N.resize(100);
  b.frames.resize(100);
  b.gt_force_N.resize(100);
  const std::vector<Trial> trials{a, b};
  const auto samples = build_detection_dataset(trials, 32, 0.01);
  ASSERT_EQ(samples.size(), 200u);
  int pos = 0, scan = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(samples[i].x.size(), 32u);
    pos += samples[i].y;
    if (i >= 100) {
      EXPECT_EQ(samples[i].y, 0);
    }
    EXPECT_EQ(samples[i].group, i < 100 ? "cv_1" : "nc_1");
  }
  for (double f : a.gt_force_N) scan += f >= 0.01;
  EXPECT_EQ(pos, scan);
  EXPECT_GT(pos, 0);
}

TEST(DetectionDataset, GridMismatchThrows) {
  SynthConfig c;
  c.contact_s_mm = 50.0;
  Trial a = simulate_trial(c);
  c.grid = ArcGrid::make(170.0, 131, 64);
  Trial b = simulate_trial(c);
  const std::vector<Trial> trials{a, b};
  EXPECT_THROW(build_detection_dataset(trials, 32, 0.01), DomainError);
}
