#include <gtest/gtest.h>

#include <random>
#include <set>

#include "clf/eval.hpp"
#include "clf/metrics.hpp"
#include "clf/synth.hpp"
#include "oracles.hpp"

using namespace clf;

TEST(RocAuc, Examples) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{0, 1, 1}), 0.5);
  EXPECT_EQ(oracle::auc_pairs({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
}

TEST(RocAuc, SingleClassThrows) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DomainError);
  EXPECT_THROW(roc_auc(std::vector<double>{}, std::vector<int>{}), DomainError);
}

TEST(RocAuc, MatchesPairwiseBruteForce) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 499;
    const bool coarse = t % 2 == 0;  // many ties
    std::vector<double> s(n);
    std::vector<int> y(n);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = g(rng) + 0.8 * y[i];
      if (coarse) s[i] = std::round(s[i] * 2) / 2;
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(roc_auc(s, y), oracle::auc_pairs(s, y), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g;
  std::vector<double> s(300);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    y[i] = static_cast<int>(rng() % 2);
    s[i] = std::round((g(rng) + y[i]) * 4) / 4;
  }
  const double base = roc_auc(s, y);
  std::vector<double> a, b, c;
  for (double v : s) {
    a.push_back(std::exp(v));
    b.push_back(v * v * v + 5.0);
    c.push_back(1.0 / (1.0 + std::exp(-3 * v)));
  }
  EXPECT_NEAR(roc_auc(a, y), base, 1e-12);
  EXPECT_NEAR(roc_auc(b, y), base, 1e-12);
  EXPECT_NEAR(roc_auc(c, y), base, 1e-12);
}

TEST(PrecisionRecall, Examples) {
  auto pr = precision_recall(std::vector<int>{1, 1, 0, 1}, std::vector<int>{1, 0, 0, 1});
  EXPECT_NEAR(*pr.precision, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(*pr.recall, 1.0);
  pr = precision_recall(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1});
  EXPECT_EQ(*pr.precision, 1.0);
  EXPECT_EQ(*pr.recall, 1.0);
  pr = precision_recall(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
  EXPECT_FALSE(pr.precision.has_value());
  EXPECT_EQ(*pr.recall, 0.0);
  pr = precision_recall(std::vector<int>{1, 0}, std::vector<int>{0, 0});
  EXPECT_FALSE(pr.recall.has_value());
  EXPECT_EQ(*pr.precision, 0.0);
}

TEST(Mae, ExamplesAndProperties) {
  EXPECT_EQ(mae(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_NEAR(mae(std::vector<double>{0, 0.1}, std::vector<double>{0.01, 0.08}), 0.015, 1e-15);
  EXPECT_EQ(mae(std::vector<double>{1}, std::vector<double>{-1}), 2.0);
  EXPECT_THROW(mae(std::vector<double>{}, std::vector<double>{}), DomainError);
  EXPECT_THROW(mae(std::vector<double>{1}, std::vector<double>{1, 2}), DomainError);
  const std::vector<double> t{0.3, -1, 2, 5}, e{0.1, -0.4, 0.25, 1};
  std::vector<double> up, down, up3;
  for (std::size_t i = 0; i < t.size(); ++i) {
    up.push_back(t[i] + e[i]);
    down.push_back(t[i] - e[i]);
    up3.push_back(t[i] + 3 * e[i]);
  }
  EXPECT_NEAR(mae(t, up), mae(t, down), 1e-15);
  EXPECT_NEAR(mae(t, up3), 3 * mae(t, up), 1e-14);
}

TEST(TestIdOrder, CvThenCcNumeric) {
  std::vector<std::string> ids{"cc_2", "cv_10", "nc_1", "cv_2", "cc_1", "cv_1"};
  std::sort(ids.begin(), ids.end(), test_id_less);
  EXPECT_EQ(ids, (std::vector<std::string>{"cv_1", "cv_2", "cv_10", "cc_1", "cc_2", "nc_1"}));
}

TEST(LotoSplit, ThreeIds) {
  const std::vector<std::string> g{"cv_2", "cv_1", "cv_3", "cv_1", "cv_2"};
  const auto folds = loto_split(g);
  ASSERT_EQ(folds.size(), 3u);
  EXPECT_EQ(folds[0].test_id, "cv_1");
  EXPECT_EQ(folds[2].test_id, "cv_3");
  for (const auto& f : folds) {
    std::set<std::size_t> tr(f.train.begin(), f.train.end()), te(f.test.begin(), f.test.end());
    for (std::size_t i : te) {
      EXPECT_EQ(g[i], f.test_id);
      EXPECT_FALSE(tr.count(i));
    }
    for (std::size_t i : tr) EXPECT_NE(g[i], f.test_id);
    EXPECT_EQ(tr.size() + te.size(), g.size());
  }
}

TEST(LotoSplit, NeedsTwoGroups) {
  EXPECT_THROW(loto_split(std::vector<std::string>{"cv_1", "cv_1"}), DomainError);
  EXPECT_THROW(loto_split(std::vector<std::string>{}), DomainError);
}

TEST(LotoSplit, PaperShapedDatasetHasSixteenFolds) {
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  const auto folds = loto_split(std::span<const Trial>(trials));
  ASSERT_EQ(folds.size(), 16u);
  EXPECT_EQ(folds.front().test_id, "cv_1");
  EXPECT_EQ(folds.back().test_id, "cc_8");
  for (const auto& f : folds) EXPECT_EQ(f.test.size(), 3u);
}

TEST(Cascade, OracleModelsGivePerfectRows) {
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  const ArcGrid& g = default_grid();
  const EvalReport r = run_cascade(oracle_detector(), oracle_localizer(g.segment_len_mm()), trials, g);
  ASSERT_EQ(r.rows.size(), 16u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(*row.roc_auc, 1.0) << row.test_id;
    EXPECT_EQ(*row.recall, 1.0);
    EXPECT_EQ(*row.precision, 1.0);
    EXPECT_EQ(*row.force_mae_N, 0.0);
    EXPECT_EQ(*row.localization_mae_mm, 0.0);
    EXPECT_TRUE(row.note.empty());
    EXPECT_EQ(row.n_localized, row.n_contact);
  }
  EXPECT_EQ(*r.mean(&EvalRow::roc_auc), 1.0);
  EXPECT_FALSE(r.samples.empty());
}

TEST(Cascade, SilentDetectorFlagsRowsAndContinues) {
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  DetectorFn silent = [](const Trial& t) { return std::vector<double>(t.size(), 0.1); };
  const EvalReport r = run_cascade(silent, oracle_localizer(2.0), trials, default_grid());
  ASSERT_EQ(r.rows.size(), 16u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(*row.roc_auc, 0.5);
    EXPECT_FALSE(row.force_mae_N.has_value());
    EXPECT_FALSE(row.precision.has_value());
    EXPECT_NE(row.note.find("never fired"), std::string::npos);
  }
}

TEST(Cascade, FailingGroupDoesNotStopOthers) {
  auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  DetectorFn picky = [](const Trial& t) {
    if (t.test_id == "cc_3") throw DomainError("boom");
    return oracle_detector()(t);
  };
  const EvalReport r = run_cascade(picky, oracle_localizer(2.0), trials, default_grid());
  ASSERT_EQ(r.rows.size(), 16u);
  for (const auto& row : r.rows) {
    if (row.test_id == "cc_3") {
      EXPECT_EQ(row.note, "boom");
      EXPECT_FALSE(row.roc_auc.has_value());
    } else {
      EXPECT_EQ(*row.roc_auc, 1.0);
    }
  }
}

TEST(Report, MeansAreUnweightedOverPresentRows) {
  EvalReport r;
  r.rows.resize(3);
  r.rows[0].test_id = "cv_1";
  r.rows[0].roc_auc = 0.9;
  r.rows[1].test_id = "cv_2";
  r.rows[1].roc_auc = 0.7;
  r.rows[2].test_id = "cc_1";
  EXPECT_NEAR(*r.mean(&EvalRow::roc_auc), 0.8, 1e-15);
  EXPECT_NEAR(*r.mean(&EvalRow::roc_auc, "cv_"), 0.8, 1e-15);
  EXPECT_FALSE(r.mean(&EvalRow::roc_auc, "cc_").has_value());
}

TEST(Report, TableAndCsvColumns) {
  const auto trials = make_paper_shaped_dataset(SynthConfig{}, 7);
  const EvalReport r = run_cascade(oracle_detector(), oracle_localizer(2.0), trials, default_grid());
  const std::string table = format_table(r);
  std::istringstream ts(table);
  std::string header;
  std::getline(ts, header);
  std::size_t pos = 0;
  for (const char* col : {"Label", "ROC-AUC", "Recall", "Precision", "Force MAE (N)", "Localization MAE (mm)"}) {
    const auto at = header.find(col, pos);
    ASSERT_NE(at, std::string::npos) << col;
    pos = at;
  }
  std::string line;
  int rows = 0, means = 0;
  while (std::getline(ts, line)) {
    if (line.rfind("cv_", 0) == 0 || line.rfind("cc_", 0) == 0) ++rows;
    if (line.rfind("mean", 0) == 0) ++means;
  }
  EXPECT_EQ(rows, 16);
  EXPECT_EQ(means, 1);

  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.rfind("label,roc_auc,recall,precision,force_mae_N,localization_mae_mm,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 18);
  EXPECT_NE(csv.find("\nmean,1,1,1,0,0,,,,\n"), std::string::npos);
  const std::string samples = samples_csv(r);
  EXPECT_EQ(static_cast<std::size_t>(std::count(samples.begin(), samples.end(), '\n')), r.samples.size() + 1);
}
