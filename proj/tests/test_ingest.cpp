#include <gtest/gtest.h>

#include <cstring>
#include <sstream>
#include <stdexcept>

#include "clf/ingest.hpp"
#include "clf/synth.hpp"

using namespace clf;

namespace {

Trial small_trial(std::size_t frames) {
  SynthConfig c;
  c.contact_s_mm = 33.3;
  c.seed = 5;
  c.force_ramp_N_per_s = 0.003;  // long enough for the 500-frame cases
  Trial t = simulate_trial(c);
  if (t.size() < frames) throw std::logic_error("synthetic trial too short");
  t.frames.resize(frames);
  t.gt_force_N.resize(frames);
  return t;
}

std::string to_text(const Trial& t) {
  std::ostringstream os;
  write_trial(t, os);
  return os.str();
}

Trial from_text(const std::string& s, ReadDiagnostics* d = nullptr) {
  std::istringstream is(s);
  return read_trial(is, d);
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(WriteTrial, RowCountsAndColumns) {
  const std::string text = to_text(small_trial(3));
  std::istringstream is(text);
  std::string line;
  int names = 0, data = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t_s,", 0) == 0) {
      ++names;
      continue;
    }
    ++data;
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 267);
  }
  EXPECT_EQ(names, 1);
  EXPECT_EQ(data, 3);
  EXPECT_EQ(trial_column_count(default_grid()), 267);
}

TEST(WriteTrial, ColumnNames) {
  const std::string names = trial_column_names(default_grid());
  EXPECT_EQ(names.rfind("t_s,motor_pos,force_N,gt_force_N,eps_000,eps_001,", 0), 0u);
  EXPECT_TRUE(names.ends_with(",eps_262"));
}

TEST(ReadTrial, RoundTripBitExact) {
  const Trial t = small_trial(200);
  const Trial r = from_text(to_text(t));
  ASSERT_EQ(r.size(), t.size());
  EXPECT_EQ(r, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    ASSERT_TRUE(bit_equal(r.frames[k].t_s, t.frames[k].t_s));
    for (std::size_t i = 0; i < t.frames[k].strain.size(); ++i) {
      ASSERT_TRUE(bit_equal(r.frames[k].strain[i], t.frames[k].strain[i]));
    }
  }
  EXPECT_EQ(to_text(r), to_text(t));
}

TEST(ReadTrial, RoundTripAwkwardReals) {
  Trial t = small_trial(1);
  t.frames[0].strain[0] = 0.1 + 0.2;
  t.frames[0].strain[1] = -1e-300;
  t.frames[0].strain[2] = 5e-324;
  t.frames[0].strain[3] = 1.7976931348623157e308;
  t.frames[0].motor_pos = -0.0;
  const Trial r = from_text(to_text(t));
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(bit_equal(r.frames[0].strain[static_cast<std::size_t>(i)], t.frames[0].strain[static_cast<std::size_t>(i)]));
  EXPECT_TRUE(bit_equal(r.frames[0].motor_pos, -0.0));
}

TEST(ReadTrial, WrongColumnCount) {
  std::string text = to_text(small_trial(2));
  text.erase(text.find_last_of(','));  // drop the last column of the last row
  text += '\n';
  try {
    from_text(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 267 columns"), std::string::npos) << e.what();
  }
}

TEST(ReadTrial, EmptyDataSectionIsFlagged) {
  ReadDiagnostics d;
  const Trial r = from_text(to_text(small_trial(0)), &d);
  EXPECT_TRUE(r.empty());
  ASSERT_EQ(d.warnings.size(), 1u);
}

TEST(ReadTrial, SideAndLocationFromHeader) {
  const Trial r = from_text(to_text(small_trial(1)));
  EXPECT_EQ(r.side, Side::convex);
  ASSERT_TRUE(r.gt_contact_s_mm.has_value());
  EXPECT_EQ(*r.gt_contact_s_mm, 33.3);

  Trial none = small_trial(1);
  none.gt_contact_s_mm.reset();
  none.side = Side::concave;
  const Trial r2 = from_text(to_text(none));
  EXPECT_EQ(r2.side, Side::concave);
  EXPECT_FALSE(r2.gt_contact_s_mm.has_value());
}

TEST(ReadTrial, NonMonotoneTimeNamesRow) {
  // The writer refuses such a trial, so corrupt the text instead.
  std::string text = to_text(small_trial(3));
  const auto last = text.rfind('\n', text.size() - 2) + 1;
  text.replace(last, text.find(',', last) - last, "-1");
  try {
    from_text(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row "), std::string::npos);
  }
}

TEST(ReadTrial, MalformedHeader) {
  EXPECT_THROW(from_text("# schema\nt_s\n"), ParseError);
  EXPECT_THROW(from_text("# schema=other/9\n"), ParseError);
  std::string text = to_text(small_trial(1));
  text.replace(text.find("n_nodes=263"), 11, "n_nodes=abc");
  EXPECT_THROW(from_text(text), ParseError);
}

TEST(ReadTrial, BadNumber) {
  std::string text = to_text(small_trial(2));
  const auto pos = text.rfind('\n', text.size() - 2);
  text.replace(pos + 1, 1, "x");
  EXPECT_THROW(from_text(text), ParseError);
}

TEST(ReadTrial, MissingFileIsIoError) { EXPECT_THROW(read_trial("/nonexistent/trial.csv"), IoError); }

TEST(Replay, IdentityAtEqualRates) {
  const Trial t = small_trial(500);
  const auto out = replay(t, 20.0, 20.0, 1e9);
  ASSERT_EQ(out.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(out[k].t_s, t.frames[k].t_s, 1e-12);
    for (std::size_t i = 0; i < 263; i += 37) EXPECT_NEAR(out[k].strain[i], t.frames[k].strain[i], 1e-9);
  }
}

TEST(Replay, NewestOnlyWithinOneSourcePeriod) {
  const Trial t = small_trial(500);
  const auto out = replay(t, 1000.0, 20.0, 1e9);
  ASSERT_FALSE(out.empty());
  for (std::size_t m = 0; m < out.size(); ++m) {
    const double tick = static_cast<double>(m) / 20.0;
    EXPECT_LE(out[m].t_s, tick + 1e-12);
    EXPECT_GT(out[m].t_s, tick - 1.0 / 1000.0 - 1e-12);
  }
  for (std::size_t m = 1; m < out.size(); ++m) EXPECT_GT(out[m].t_s, out[m - 1].t_s);
}

TEST(Replay, StopsAtForceAndBoundsLength) {
  SynthConfig c;
  c.contact_s_mm = 90.0;
  const Trial t = simulate_trial(c);
  const auto out = replay(t, 1000.0, 7.0);
  ASSERT_FALSE(out.empty());
  for (std::size_t m = 0; m + 1 < out.size(); ++m) EXPECT_LT(out[m].force_N, 0.10);
  EXPECT_LE(out.size(), static_cast<std::size_t>(std::ceil(t.duration_s() * 7.0)) + 1);
}

TEST(Replay, RejectsBadRates) {
  const Trial t = small_trial(10);
  EXPECT_THROW(replay(t, 10.0, 20.0), DomainError);
  EXPECT_THROW(replay(t, 10.0, 0.0), DomainError);
}
