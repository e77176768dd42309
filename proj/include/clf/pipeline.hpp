#pragma once

// Cascade models and the leave-one-test-id cross-validation driver.

#include <atomic>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "clf/cnnfilm.hpp"
#include "clf/config.hpp"
#include "clf/eval.hpp"
#include "clf/features.hpp"
#include "clf/gbdt.hpp"

namespace clf {

/// Deterministic child seed for (base, stream, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint32_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), stream,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

inline constexpr std::uint32_t kDetectorStream = 1;
inline constexpr std::uint32_t kLocalizerStream = 2;

class Detector {
 public:
  Detector() = default;
  Detector(int k, GbdtModel model) : k_(k), model_(std::move(model)) {}

  int k() const { return k_; }
  const GbdtModel& model() const { return model_; }

  std::vector<double> scores(const Trial& trial) const {
    std::vector<double> s;
    s.reserve(trial.frames.size());
    for (const StrainFrame& f : trial.frames) s.push_back(model_.predict_proba(downsample(f.strain, k_)));
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "clf-detector";
    j["version"] = 1;
    j["k"] = k_;
    j["model"] = model_.to_json();
    return j;
  }

  static Detector from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "clf-detector" || j.at("version") != 1) throw ParseError("not a detector file");
      return Detector(j.at("k").get<int>(), GbdtModel::from_json(j.at("model")));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("detector file: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << to_json().dump() << '\n';
    if (!os) throw IoError("write failed for '" + path + "'");
  }

  static Detector load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("detector file '" + path + "': " + e.what());
    }
  }

 private:
  int k_ = 32;
  GbdtModel model_;
};

using LocalizerNet = cnn::CnnFilmNet<float>;

class Localizer {
 public:
  Localizer() = default;
  explicit Localizer(LocalizerNet net) : net_(std::move(net)) {}

  const LocalizerNet& net() const { return net_; }
  LocalizerNet& net() { return net_; }

  std::vector<ForceDistribution> predict(const Trial& trial, std::span<const std::size_t> frames,
                                         std::size_t batch = 256) const {
    std::vector<ForceDistribution> out;
    out.reserve(frames.size());
    std::vector<std::vector<double>> strains;
    std::vector<double> motors;
    for (std::size_t start = 0; start < frames.size(); start += batch) {
      const std::size_t end = std::min(frames.size(), start + batch);
      strains.clear();
      motors.clear();
      for (std::size_t i = start; i < end; ++i) {
        strains.push_back(trial.frames.at(frames[i]).strain);
        motors.push_back(trial.frames[frames[i]].motor_pos);
      }
      for (auto& d : net_.predict(strains, motors)) out.push_back(std::move(d));
    }
    return out;
  }

  void save(const std::string& path) const { cnn::save_checkpoint(net_, path); }
  static Localizer load(const std::string& path) { return Localizer(cnn::load_checkpoint<float>(path)); }

 private:
  LocalizerNet net_;
};

/// Contact frames (force at or above threshold) with known location, every
/// `stride`-th one per trial.
inline std::vector<cnn::LocalizerSample> build_localizer_dataset(std::span<const Trial> trials, double sigma_mm,
                                                                 double f_thresh_N, int stride = 1) {
  if (stride < 1) throw DomainError("stride must be >= 1");
  std::vector<cnn::LocalizerSample> data;
  for (const Trial& t : trials) {
    if (!t.gt_contact_s_mm) continue;
    int seen = 0;
    for (std::size_t f = 0; f < t.frames.size(); ++f) {
      if (!label_contact(t.gt_force_N[f], f_thresh_N)) continue;
      if (seen++ % stride != 0) continue;
      data.push_back({t.frames[f].strain, t.frames[f].motor_pos,
                      encode_targets(t.gt_force_N[f], *t.gt_contact_s_mm, sigma_mm, t.grid)});
    }
  }
  return data;
}

inline Detector train_detector(std::span<const Trial> trials, const RunConfig& cfg, std::uint64_t seed) {
  const auto samples = build_detection_dataset(trials, cfg.feature_k, cfg.contact_threshold_N);
  return Detector(cfg.feature_k, fit_gbdt(std::span<const DetectionSample>(samples), cfg.gbdt, seed));
}

inline Localizer train_localizer(std::span<const Trial> trials, const RunConfig& cfg, std::uint64_t seed,
                                 cnn::TrainReport* report = nullptr,
                                 const std::function<void(int, double)>& on_epoch = {}) {
  const auto data = build_localizer_dataset(trials, cfg.cnn.sigma(cfg.grid()), cfg.contact_threshold_N,
                                            cfg.cnn.frame_stride);
  if (data.empty()) throw DomainError("no contact frames to train the localizer on");
  LocalizerNet net(cfg.cnn.arch, derive_seed(seed, 0, 0));
  auto r = cnn::train(net, std::span<const cnn::LocalizerSample>(data), cfg.cnn.train_options(derive_seed(seed, 0, 1)),
                      on_epoch);
  if (report) *report = std::move(r);
  return Localizer(std::move(net));
}

using LogFn = std::function<void(const std::string&)>;

/// Leave-one-test-id cross-validation of the full cascade. Fold f uses seeds
/// derived from (cfg.seed, f), so the report does not depend on `jobs`.
inline EvalReport cross_validate(std::span<const Trial> trials, const RunConfig& cfg, int jobs = 1,
                                 const LogFn& log = {}) {
  const auto folds = loto_split(trials);
  std::vector<EvalReport> parts(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  std::mutex log_mutex;
  auto emit = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(line);
  };

  auto run_fold = [&](std::size_t fi) {
    const Fold& fold = folds[fi];
    std::vector<Trial> train, test;
    for (std::size_t i : fold.train) train.push_back(trials[i]);
    for (std::size_t i : fold.test) test.push_back(trials[i]);
    DetectorFn det;
    LocalizerFn loc;
    if (cfg.oracle) {
      det = oracle_detector(cfg.contact_threshold_N);
      loc = oracle_localizer(cfg.cnn.sigma(cfg.grid()));
    } else {
      auto detector = std::make_shared<Detector>(train_detector(train, cfg, derive_seed(cfg.seed, kDetectorStream, fi)));
      auto localizer =
          std::make_shared<Localizer>(train_localizer(train, cfg, derive_seed(cfg.seed, kLocalizerStream, fi)));
      det = [detector](const Trial& t) { return detector->scores(t); };
      loc = [localizer](const Trial& t, std::span<const std::size_t> f) { return localizer->predict(t, f); };
    }
    EvalReport part = evaluate_group(det, loc, test, cfg.grid(), cfg.contact_threshold_N);
    for (SampleError& e : part.samples) e.trial = fold.test[e.trial];
    const EvalRow& row = part.rows.front();
    emit("event=fold_done test_id=" + fold.test_id + " roc_auc=" + detail::fixed(row.roc_auc, 4) +
         " force_mae_N=" + detail::fixed(row.force_mae_N, 4) +
         " localization_mae_mm=" + detail::fixed(row.localization_mae_mm, 3));
    parts[fi] = std::move(part);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t fi = next++; fi < folds.size(); fi = next++) {
      try {
        run_fold(fi);
      } catch (...) {
        errors[fi] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(folds.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    if (errors[fi]) {
      try {
        std::rethrow_exception(errors[fi]);
      } catch (const DivergenceError&) {
        throw;
      } catch (const std::exception& e) {
        EvalRow row;
        row.test_id = folds[fi].test_id;
        row.note = e.what();
        report.rows.push_back(std::move(row));
        continue;
      }
    }
    report.append(std::move(parts[fi]));
  }
  return report;
}

}  // namespace clf
