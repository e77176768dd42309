#pragma once

// Leave-one-test-id folds, cascade evaluation and report formatting.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "clf/cnnfilm/encoding.hpp"
#include "clf/features.hpp"
#include "clf/ingest.hpp"
#include "clf/metrics.hpp"
#include "clf/straincore.hpp"

namespace clf {

inline constexpr double kDecisionThreshold = 0.5;

/// Orders ids as cv_* before cc_* before anything else, then by numeric
/// suffix, then lexically.
inline bool test_id_less(std::string_view a, std::string_view b) {
  auto key = [](std::string_view id) {
    int family = 2;
    if (id.starts_with("cv_")) family = 0;
    else if (id.starts_with("cc_")) family = 1;
    long number = -1;
    const auto us = id.rfind('_');
    if (us != std::string_view::npos) {
      long v = 0;
      const auto* first = id.data() + us + 1;
      const auto* last = id.data() + id.size();
      auto res = std::from_chars(first, last, v);
      if (res.ec == std::errc() && res.ptr == last && first != last) number = v;
    }
    return std::tuple(family, number);
  };
  const auto ka = key(a), kb = key(b);
  if (ka != kb) return ka < kb;
  return a < b;
}

struct Fold {
  std::string test_id;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One fold per distinct group id; indices refer to positions in `groups`.
inline std::vector<Fold> loto_split(std::span<const std::string> groups) {
  std::vector<std::string> ids(groups.begin(), groups.end());
  std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) { return test_id_less(a, b); });
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw DomainError("leave-one-test-id split needs at least 2 distinct ids, got " +
                                        std::to_string(ids.size()));
  std::vector<Fold> folds;
  folds.reserve(ids.size());
  for (const std::string& id : ids) {
    Fold f;
    f.test_id = id;
    for (std::size_t i = 0; i < groups.size(); ++i) (groups[i] == id ? f.test : f.train).push_back(i);
    folds.push_back(std::move(f));
  }
  return folds;
}

inline std::vector<Fold> loto_split(std::span<const Trial> trials) {
  std::vector<std::string> groups;
  groups.reserve(trials.size());
  for (const Trial& t : trials) groups.push_back(t.test_id);
  return loto_split(std::span<const std::string>(groups));
}

/// Per-frame contact scores in [0, 1] for one trial.
using DetectorFn = std::function<std::vector<double>(const Trial&)>;
/// Force distributions for the requested frames of one trial.
using LocalizerFn = std::function<std::vector<ForceDistribution>(const Trial&, std::span<const std::size_t>)>;

struct EvalRow {
  std::string test_id;
  std::optional<double> roc_auc;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> force_mae_N;
  std::optional<double> localization_mae_mm;
  std::size_t n_frames = 0;
  std::size_t n_contact = 0;
  std::size_t n_localized = 0;
  std::string note;  // metric failures and flags, empty when clean
};

struct SampleError {
  std::string test_id;
  std::size_t trial = 0;  // index within the evaluated trial list
  std::size_t frame = 0;
  double t_s = 0.0;
  double force_true_N = 0.0;
  double force_pred_N = 0.0;
  double s_true_mm = 0.0;
  double s_pred_mm = 0.0;
  double force_abs_err_N() const { return std::abs(force_pred_N - force_true_N); }
  double loc_abs_err_mm() const { return std::abs(s_pred_mm - s_true_mm); }
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<SampleError> samples;

  /// Unweighted mean over rows where the field is present.
  static std::optional<double> mean_of(std::span<const EvalRow> rows, std::optional<double> EvalRow::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const EvalRow& r : rows) {
      if (r.*field) {
        sum += *(r.*field);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  std::optional<double> mean(std::optional<double> EvalRow::*field) const { return mean_of(rows, field); }

  /// Mean over rows whose id starts with `prefix` (e.g. "cv_").
  std::optional<double> mean(std::optional<double> EvalRow::*field, std::string_view prefix) const {
    std::vector<EvalRow> subset;
    for (const EvalRow& r : rows) {
      if (std::string_view(r.test_id).starts_with(prefix)) subset.push_back(r);
    }
    return mean_of(subset, field);
  }

  void sort_rows() {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const EvalRow& a, const EvalRow& b) { return test_id_less(a.test_id, b.test_id); });
    std::stable_sort(samples.begin(), samples.end(),
                     [](const SampleError& a, const SampleError& b) { return test_id_less(a.test_id, b.test_id); });
  }

  void append(EvalReport other) {
    rows.insert(rows.end(), std::make_move_iterator(other.rows.begin()), std::make_move_iterator(other.rows.end()));
    samples.insert(samples.end(), std::make_move_iterator(other.samples.begin()),
                   std::make_move_iterator(other.samples.end()));
  }
};

namespace detail {

inline void add_note(EvalRow& row, const std::string& msg) {
  if (!row.note.empty()) row.note += "; ";
  row.note += msg;
}

}  // namespace detail

/// Evaluates the detector on every frame and the localizer on frames that are
/// in contact and detected. `trials` must share one test id.
inline EvalReport evaluate_group(const DetectorFn& detector, const LocalizerFn& localizer, std::span<const Trial> trials,
                                 const ArcGrid& grid, double f_thresh_N = kContactThresholdN,
                                 std::size_t first_trial_index = 0) {
  EvalReport report;
  if (trials.empty()) return report;
  EvalRow row;
  row.test_id = trials.front().test_id;
  std::vector<double> scores;
  std::vector<int> labels, preds;
  std::vector<double> f_true, f_pred, s_true, s_pred;

  for (std::size_t ti = 0; ti < trials.size(); ++ti) {
    const Trial& trial = trials[ti];
    if (trial.test_id != row.test_id) throw DomainError("evaluate_group: mixed test ids");
    if (!(trial.grid == grid)) throw DomainError("trial " + trial.test_id + " uses a different grid");
    const std::vector<double> sc = detector(trial);
    if (sc.size() != trial.frames.size()) throw DomainError("detector returned the wrong number of scores");
    std::vector<std::size_t> gated;
    for (std::size_t f = 0; f < sc.size(); ++f) {
      const int y = label_contact(trial.gt_force_N[f], f_thresh_N);
      const int p = sc[f] >= kDecisionThreshold ? 1 : 0;
      scores.push_back(sc[f]);
      labels.push_back(y);
      preds.push_back(p);
      if (y) ++row.n_contact;
      if (y && p && trial.gt_contact_s_mm) gated.push_back(f);
    }
    row.n_frames += sc.size();
    if (gated.empty()) continue;
    const auto dists = localizer(trial, gated);
    if (dists.size() != gated.size()) throw DomainError("localizer returned the wrong number of outputs");
    for (std::size_t g = 0; g < gated.size(); ++g) {
      const Decoded d = decode(dists[g], grid);
      const std::size_t f = gated[g];
      SampleError e;
      e.test_id = row.test_id;
      e.trial = first_trial_index + ti;
      e.frame = f;
      e.t_s = trial.frames[f].t_s;
      e.force_true_N = trial.gt_force_N[f];
      e.force_pred_N = d.force_N;
      e.s_true_mm = *trial.gt_contact_s_mm;
      e.s_pred_mm = d.s_mm;
      f_true.push_back(e.force_true_N);
      f_pred.push_back(e.force_pred_N);
      s_true.push_back(e.s_true_mm);
      s_pred.push_back(e.s_pred_mm);
      report.samples.push_back(std::move(e));
    }
  }

  try {
    row.roc_auc = roc_auc(scores, labels);
  } catch (const DomainError& e) {
    detail::add_note(row, e.what());
  }
  const PrecisionRecall pr = precision_recall(preds, labels);
  row.precision = pr.precision;
  row.recall = pr.recall;
  row.n_localized = f_true.size();
  if (row.n_localized > 0) {
    row.force_mae_N = mae(f_true, f_pred);
    row.localization_mae_mm = mae(s_true, s_pred);
  } else {
    detail::add_note(row, "detector never fired on a contact frame");
  }
  report.rows.push_back(std::move(row));
  return report;
}

/// Groups trials by test id and evaluates each group with the same models.
/// A failing group yields a flagged row; remaining groups still run.
inline EvalReport run_cascade(const DetectorFn& detector, const LocalizerFn& localizer, std::span<const Trial> trials,
                              const ArcGrid& grid, double f_thresh_N = kContactThresholdN) {
  std::map<std::string, std::vector<std::size_t>, decltype(&test_id_less)> groups(&test_id_less);
  for (std::size_t i = 0; i < trials.size(); ++i) groups[trials[i].test_id].push_back(i);
  EvalReport report;
  for (const auto& [id, idx] : groups) {
    std::vector<Trial> members;
    for (std::size_t i : idx) members.push_back(trials[i]);
    try {
      EvalReport part = evaluate_group(detector, localizer, members, grid, f_thresh_N);
      for (SampleError& e : part.samples) e.trial = idx[e.trial];
      report.append(std::move(part));
    } catch (const std::exception& e) {
      EvalRow row;
      row.test_id = id;
      row.note = e.what();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

inline DetectorFn oracle_detector(double f_thresh_N = kContactThresholdN) {
  return [f_thresh_N](const Trial& t) {
    std::vector<double> s;
    s.reserve(t.frames.size());
    for (double f : t.gt_force_N) s.push_back(static_cast<double>(label_contact(f, f_thresh_N)));
    return s;
  };
}

/// Returns the encoded ground truth for each requested frame.
inline LocalizerFn oracle_localizer(double sigma_mm) {
  return [sigma_mm](const Trial& t, std::span<const std::size_t> frames) {
    std::vector<ForceDistribution> out;
    out.reserve(frames.size());
    for (std::size_t f : frames) {
      if (!t.gt_contact_s_mm) throw DomainError("trial " + t.test_id + " has no ground-truth location");
      out.push_back(encode_targets(t.gt_force_N[f], *t.gt_contact_s_mm, sigma_mm, t.grid));
    }
    return out;
  };
}

// ---- formatting ------------------------------------------------------------

inline const char* const kReportColumns[] = {"ROC-AUC", "Recall", "Precision", "Force MAE (N)", "Localization MAE (mm)"};

namespace detail {

inline std::string fixed(std::optional<double> v, int digits) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
  return buf;
}

inline std::string csv_value(std::optional<double> v) { return v ? format_real(*v) : std::string(); }

inline std::string pad(const std::string& s, std::size_t w, bool right) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

/// Aligned text table, one line per row plus a mean line.
inline std::string format_table(const EvalReport& report) {
  const std::vector<std::string> header = {"Label", kReportColumns[0], kReportColumns[1], kReportColumns[2],
                                           kReportColumns[3], kReportColumns[4]};
  std::vector<std::vector<std::string>> body;
  auto cells = [](std::string label, std::optional<double> auc, std::optional<double> rec,
                  std::optional<double> prec, std::optional<double> fm, std::optional<double> lm) {
    return std::vector<std::string>{std::move(label),      detail::fixed(auc, 3), detail::fixed(rec, 3),
                                    detail::fixed(prec, 3), detail::fixed(fm, 3),  detail::fixed(lm, 3)};
  };
  for (const EvalRow& r : report.rows) {
    body.push_back(cells(r.test_id, r.roc_auc, r.recall, r.precision, r.force_mae_N, r.localization_mae_mm));
  }
  const auto mean_row = cells("mean", report.mean(&EvalRow::roc_auc), report.mean(&EvalRow::recall),
                              report.mean(&EvalRow::precision), report.mean(&EvalRow::force_mae_N),
                              report.mean(&EvalRow::localization_mae_mm));
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = std::max(header[c].size(), mean_row[c].size());
    for (const auto& line : body) width[c] = std::max(width[c], line[c].size());
  }
  auto emit = [&](std::ostringstream& os, const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) os << "  ";
      os << detail::pad(line[c], width[c], c > 0);
    }
    os << '\n';
  };
  std::ostringstream os;
  emit(os, header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& line : body) emit(os, line);
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  emit(os, mean_row);
  for (const EvalRow& r : report.rows) {
    if (!r.note.empty()) os << "note " << r.test_id << ": " << r.note << '\n';
  }
  return os.str();
}

/// Machine-readable report. Empty cells mark absent values; the final row
/// has label "mean".
inline std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "label,roc_auc,recall,precision,force_mae_N,localization_mae_mm,n_frames,n_contact,n_localized,note\n";
  for (const EvalRow& r : report.rows) {
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    os << r.test_id << ',' << detail::csv_value(r.roc_auc) << ',' << detail::csv_value(r.recall) << ','
       << detail::csv_value(r.precision) << ',' << detail::csv_value(r.force_mae_N) << ','
       << detail::csv_value(r.localization_mae_mm) << ',' << r.n_frames << ',' << r.n_contact << ','
       << r.n_localized << ',' << note << '\n';
  }
  os << "mean," << detail::csv_value(report.mean(&EvalRow::roc_auc)) << ','
     << detail::csv_value(report.mean(&EvalRow::recall)) << ',' << detail::csv_value(report.mean(&EvalRow::precision))
     << ',' << detail::csv_value(report.mean(&EvalRow::force_mae_N)) << ','
     << detail::csv_value(report.mean(&EvalRow::localization_mae_mm)) << ",,,,\n";
  return os.str();
}

/// Per-sample absolute errors, one line per localized frame.
inline std::string samples_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "test_id,trial,frame,t_s,force_true_N,force_pred_N,force_abs_err_N,s_true_mm,s_pred_mm,loc_abs_err_mm\n";
  for (const SampleError& e : report.samples) {
    os << e.test_id << ',' << e.trial << ',' << e.frame << ',' << format_real(e.t_s) << ','
       << format_real(e.force_true_N) << ',' << format_real(e.force_pred_N) << ','
       << format_real(e.force_abs_err_N()) << ',' << format_real(e.s_true_mm) << ',' << format_real(e.s_pred_mm)
       << ',' << format_real(e.loc_abs_err_mm()) << '\n';
  }
  return os.str();
}

}  // namespace clf
