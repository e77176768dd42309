#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "clf/features.hpp"
#include "clf/synth.hpp"
#include "oracles.hpp"

using namespace clf;

namespace {

SynthConfig noiseless(std::optional<double> s = 85.0) {
  SynthConfig c;
  c.noise_std_microstrain = 0.0;
  c.contact_s_mm = s;
  return c;
}

}  // namespace

TEST(Baseline, ZeroAmplitudeIsZero) {
  for (double e : baseline_strain(default_grid(), 0.0, Side::convex, 0.3)) EXPECT_EQ(e, 0.0);
}

TEST(Baseline, SidesAreNegations) {
  const auto cv = baseline_strain(default_grid(), 1234.0, Side::convex, 0.3);
  const auto cc = baseline_strain(default_grid(), 1234.0, Side::concave, 0.3);
  for (std::size_t i = 0; i < cv.size(); ++i) EXPECT_EQ(cv[i], -cc[i]);
}

TEST(Baseline, PeakAtMidLength) {
  // Half-sine peak A*offset at s = L/2; the nearest node sits within half a pitch.
  const ArcGrid& g = default_grid();
  const double a = 1000.0, off = 0.3;
  const auto e = baseline_strain(g, a, Side::convex, off);
  const auto it = std::max_element(e.begin(), e.end());
  const double s_peak = g.node_position(static_cast<int>(it - e.begin()));
  EXPECT_LE(std::abs(s_peak - 85.0), g.node_pitch_mm / 2 + 1e-12);
  EXPECT_LE(*it, a * off);
  const double worst = a * off * std::cos(std::numbers::pi * (g.node_pitch_mm / 2) / g.length_mm);
  EXPECT_GE(*it, worst);
}

TEST(Perturbation, ZeroForceIsZero) {
  for (double e : contact_perturbation(default_grid(), 50.0, 0.0, Side::convex)) EXPECT_EQ(e, 0.0);
}

TEST(Perturbation, LinearInForce) {
  const auto a = contact_perturbation(default_grid(), 50.0, 0.03, Side::concave);
  const auto b = contact_perturbation(default_grid(), 50.0, 0.06, Side::concave);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.0 * a[i], 1e-12 * std::abs(b[i]));
}

TEST(Perturbation, PeakAtNearestNode) {
  const ArcGrid& g = default_grid();
  const auto nodes = g.node_positions();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, g.length_mm);
  for (int k = 0; k < 100; ++k) {
    const double s = u(rng);
    const auto bump = contact_perturbation(g, s, 0.05, Side::convex);
    const int arg = static_cast<int>(std::max_element(bump.begin(), bump.end()) - bump.begin());
    EXPECT_EQ(arg, oracle::nearest_node(nodes, s)) << "s=" << s;
  }
}

TEST(Perturbation, OutOfRangeThrows) {
  EXPECT_THROW(contact_perturbation(default_grid(), 171.0, 0.05, Side::convex), DomainError);
  EXPECT_THROW(contact_perturbation(default_grid(), 50.0, -0.1, Side::convex), DomainError);
}

TEST(SimulateTrial, NoContactHasZeroForceAndLabels) {
  const Trial t = simulate_trial(noiseless(std::nullopt));
  ASSERT_FALSE(t.empty());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(t.frames[k].force_N, 0.0);
    EXPECT_EQ(label_contact(t.gt_force_N[k]), 0);
  }
}

TEST(SimulateTrial, Deterministic) {
  SynthConfig c;
  c.contact_s_mm = 40.0;
  c.seed = 99;
  EXPECT_EQ(simulate_trial(c), simulate_trial(c));
}

TEST(SimulateTrial, StopsAtFirstFrameReachingMaxForce) {
  for (double onset : {0.0, 1.3, 2.75, 3.1}) {
    SynthConfig c = noiseless();
    c.approach_s = onset;
    const Trial t = simulate_trial(c);
    ASSERT_FALSE(t.empty());
    EXPECT_GE(t.frames.back().force_N, 0.10);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) EXPECT_LT(t.frames[k].force_N, 0.10);
  }
}

TEST(SimulateTrial, MonotoneMotorAndTime) {
  const Trial t = simulate_trial(noiseless());
  t.validate();
  for (std::size_t k = 1; k < t.size(); ++k) {
    EXPECT_GT(t.frames[k].t_s, t.frames[k - 1].t_s);
    EXPECT_GE(t.frames[k].motor_pos, t.frames[k - 1].motor_pos);
  }
}

TEST(SimulateTrial, SuperpositionNoiseless) {
  const SynthConfig c = noiseless(60.0);
  const Trial t = simulate_trial(c);
  SynthConfig free = c;
  free.contact_s_mm.reset();
  const Trial f = simulate_trial(free);
  ASSERT_EQ(t.size(), f.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(t.frames[k].motor_pos, f.frames[k].motor_pos);
    const auto base = baseline_strain(c.grid, c.curvature_per_motor * std::abs(t.frames[k].motor_pos), c.side,
                                      c.fiber_offset_mm);
    const auto bump = contact_perturbation(c.grid, 60.0, t.gt_force_N[k], c.side, c.contact);
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_NEAR(t.frames[k].strain[i], base[i] + bump[i], 1e-9);
      EXPECT_NEAR(t.frames[k].strain[i] - f.frames[k].strain[i], bump[i], 1e-9);
    }
  }
}

TEST(SimulateTrial, NoiseStdWithinTwentyPercent) {
  SynthConfig c;
  c.contact_s_mm.reset();
  c.noise_std_microstrain = 2.0;
  c.curvature_per_motor = 0.0;
  c.approach_s = 0.0;
  c.force_ramp_N_per_s = 0.1 / 999.5 * 20.0;  // about 1000 frames
  const Trial t = simulate_trial(c);
  ASSERT_GE(t.size(), 1000u);
  for (int node : {0, 131, 262}) {
    double sum = 0, sq = 0;
    for (std::size_t k = 0; k < 1000; ++k) sum += t.frames[k].strain[static_cast<std::size_t>(node)];
    const double mean = sum / 1000;
    for (std::size_t k = 0; k < 1000; ++k) {
      const double d = t.frames[k].strain[static_cast<std::size_t>(node)] - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / 999);
    EXPECT_NEAR(sd, 2.0, 0.4) << "node " << node;
  }
}

TEST(Dataset, PaperShape) {
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  EXPECT_EQ(trials.size(), 48u);
  std::set<std::string> ids;
  for (const auto& t : trials) {
    ids.insert(t.test_id);
    EXPECT_TRUE(is_paper_test_id(t.test_id));
    ASSERT_TRUE(t.gt_contact_s_mm.has_value());
  }
  EXPECT_EQ(ids.size(), 16u);
}

TEST(Dataset, SignConventionAtContactFrames) {
  for (const auto& t : make_paper_shaped_dataset(SynthConfig{}, 7)) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!label_contact(t.gt_force_N[k])) continue;
      double mean = 0;
      for (double e : t.frames[k].strain) mean += e;
      mean /= static_cast<double>(t.frames[k].strain.size());
      if (t.side == Side::convex) EXPECT_GT(mean, 0.0) << t.test_id;
      else EXPECT_LT(mean, 0.0) << t.test_id;
    }
  }
}

TEST(Dataset, NoContactTrials) {
  DatasetOptions o;
  o.no_contact_trials = 3;
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7, o);
  ASSERT_EQ(trials.size(), 51u);
  EXPECT_EQ(trials.back().test_id, "nc_3");
  EXPECT_FALSE(trials.back().gt_contact_s_mm.has_value());
}

TEST(Dataset, DeterministicAndSeedSensitive) {
  const auto a = make_paper_shaped_dataset(SynthConfig{}, 3);
  EXPECT_EQ(a, make_paper_shaped_dataset(SynthConfig{}, 3));
  EXPECT_NE(a, make_paper_shaped_dataset(SynthConfig{}, 4));
}
