// clf: synthetic data generation, cascade training, evaluation and inference.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clf/config.hpp"
#include "clf/eval.hpp"
#include "clf/ingest.hpp"
#include "clf/pipeline.hpp"
#include "clf/synth.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigFailure = 2,
  kIoFailure = 3,
  kDivergence = 4,
};

void log_line(const std::string& line) { std::cerr << line << '\n'; }

std::string kv_quote(const std::string& v) {
  if (v.find_first_of(" =\"") == std::string::npos && !v.empty()) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> data;
};

clf::RunConfig resolve_config(const Globals& g) {
  clf::RunConfig cfg = g.config_path.empty() ? clf::RunConfig{} : clf::load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (g.out) cfg.out_dir = *g.out;
  if (g.data) cfg.data_dir = *g.data;
  cfg.validate();
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw clf::IoError("cannot create directory '" + dir + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw clf::IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw clf::IoError("write failed for '" + path.string() + "'");
}

/// Trial files in a directory, in file-name order.
std::vector<clf::Trial> load_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw clf::IoError("data directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" && entry.path().filename() != "manifest.csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw clf::IoError("no trial files in '" + dir + "'");
  std::vector<clf::Trial> trials;
  for (const auto& f : files) {
    clf::ReadDiagnostics diag;
    trials.push_back(clf::read_trial(f.string(), &diag));
    for (const auto& w : diag.warnings) log_line("event=warning file=" + kv_quote(f.string()) + " msg=" + kv_quote(w));
  }
  log_line("event=loaded dir=" + kv_quote(dir) + " trials=" + std::to_string(trials.size()));
  return trials;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---- verbs -----------------------------------------------------------------

int cmd_synth(const Globals& g) {
  const clf::RunConfig cfg = resolve_config(g);
  const std::string dir = g.out ? *g.out : cfg.data_dir;
  ensure_dir(dir);
  const auto trials = clf::make_paper_shaped_dataset(cfg.synth, cfg.seed, cfg.dataset);
  std::ostringstream manifest;
  manifest << "file,test_id,side,frames,gt_contact_s_mm\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const clf::Trial& t = trials[i];
    char name[64];
    std::snprintf(name, sizeof(name), "trial_%03zu_%s.csv", i, t.test_id.c_str());
    clf::write_trial(t, (fs::path(dir) / name).string());
    manifest << name << ',' << t.test_id << ',' << clf::side_tag(t.side) << ',' << t.frames.size() << ','
             << (t.gt_contact_s_mm ? clf::format_real(*t.gt_contact_s_mm) : std::string()) << '\n';
  }
  write_text(fs::path(dir) / "manifest.csv", manifest.str());
  std::cout << manifest.str();
  log_line("event=synth_done dir=" + kv_quote(dir) + " trials=" + std::to_string(trials.size()) +
           " seed=" + std::to_string(cfg.seed));
  return kOk;
}

int cmd_train_detect(const Globals& g) {
  const clf::RunConfig cfg = resolve_config(g);
  const auto trials = load_dir(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  // Per-fold detector AUC under leave-one-test-id CV.
  const auto folds = clf::loto_split(std::span<const clf::Trial>(trials));
  std::ostringstream csv;
  csv << "test_id,roc_auc\n";
  double sum = 0.0;
  int n = 0;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    std::vector<clf::Trial> train, test;
    for (std::size_t i : folds[fi].train) train.push_back(trials[i]);
    for (std::size_t i : folds[fi].test) test.push_back(trials[i]);
    const auto det = clf::train_detector(train, cfg, clf::derive_seed(cfg.seed, clf::kDetectorStream, fi));
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& t : test) {
      const auto s = det.scores(t);
      scores.insert(scores.end(), s.begin(), s.end());
      for (double f : t.gt_force_N) labels.push_back(clf::label_contact(f, cfg.contact_threshold_N));
    }
    std::string auc_text;
    try {
      const double auc = clf::roc_auc(scores, labels);
      sum += auc;
      ++n;
      auc_text = fmt(auc, 4);
      csv << folds[fi].test_id << ',' << clf::format_real(auc) << '\n';
    } catch (const clf::DomainError& e) {
      auc_text = "undefined";
      csv << folds[fi].test_id << ",\n";
    }
    std::cout << "fold=" << folds[fi].test_id << " roc_auc=" << auc_text << '\n';
  }
  if (n > 0) std::cout << "mean_roc_auc=" << fmt(sum / n, 4) << '\n';
  write_text(fs::path(cfg.out_dir) / "detect_folds.csv", csv.str());

  const auto det = clf::train_detector(trials, cfg, clf::derive_seed(cfg.seed, clf::kDetectorStream, folds.size()));
  const auto path = (fs::path(cfg.out_dir) / "detector.json").string();
  det.save(path);
  log_line("event=train_detect_done out=" + kv_quote(path) + " folds=" + std::to_string(folds.size()) +
           " seconds=" + fmt(seconds_since(t0), 2));
  return kOk;
}

int cmd_train_locate(const Globals& g) {
  const clf::RunConfig cfg = resolve_config(g);
  const auto trials = load_dir(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  clf::cnn::TrainReport report;
  const auto loc = clf::train_localizer(trials, cfg, clf::derive_seed(cfg.seed, clf::kLocalizerStream, 0), &report,
                                        [](int epoch, double loss) {
                                          log_line("event=epoch epoch=" + std::to_string(epoch) +
                                                   " loss=" + clf::format_real(loss));
                                        });
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    csv << e + 1 << ',' << clf::format_real(report.epoch_loss[e]) << '\n';
  }
  write_text(fs::path(cfg.out_dir) / "loss_curve.csv", csv.str());
  const auto path = (fs::path(cfg.out_dir) / "localizer.ckpt").string();
  loc.save(path);
  log_line("event=train_locate_done out=" + kv_quote(path) + " epochs=" + std::to_string(report.epoch_loss.size()) +
           " seconds=" + fmt(seconds_since(t0), 2));
  return kOk;
}

struct EvalArgs {
  std::string detector;
  std::string localizer;
  bool oracle = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  clf::RunConfig cfg = resolve_config(g);
  if (a.oracle) cfg.oracle = true;
  const auto trials = load_dir(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  clf::EvalReport report;
  std::string mode;
  if (!cfg.oracle && (!a.detector.empty() || !a.localizer.empty())) {
    if (a.detector.empty() || a.localizer.empty()) {
      throw clf::ConfigError("--detector and --localizer must be given together");
    }
    mode = "checkpoints";
    const auto det = std::make_shared<clf::Detector>(clf::Detector::load(a.detector));
    const auto loc = std::make_shared<clf::Localizer>(clf::Localizer::load(a.localizer));
    if (det->k() != cfg.feature_k) log_line("event=warning msg=\"detector k differs from config\"");
    report = clf::run_cascade([det](const clf::Trial& t) { return det->scores(t); },
                              [loc](const clf::Trial& t, std::span<const std::size_t> f) { return loc->predict(t, f); },
                              trials, cfg.grid(), cfg.contact_threshold_N);
  } else {
    mode = cfg.oracle ? "oracle" : "cv";
    report = clf::cross_validate(trials, cfg, cfg.jobs, log_line);
  }
  const std::string table = clf::format_table(report);
  std::cout << table;
  write_text(fs::path(cfg.out_dir) / "report.txt", table);
  write_text(fs::path(cfg.out_dir) / "report.csv", clf::report_csv(report));
  write_text(fs::path(cfg.out_dir) / "samples.csv", clf::samples_csv(report));
  auto opt = [](std::optional<double> v, int d) { return v ? fmt(*v, d) : std::string("nan"); };
  log_line("event=eval_done mode=" + mode + " rows=" + std::to_string(report.rows.size()) +
           " mean_roc_auc=" + opt(report.mean(&clf::EvalRow::roc_auc), 4) +
           " mean_force_mae_N=" + opt(report.mean(&clf::EvalRow::force_mae_N), 4) +
           " mean_localization_mae_mm=" + opt(report.mean(&clf::EvalRow::localization_mae_mm), 3) +
           " seconds=" + fmt(seconds_since(t0), 2));
  return kOk;
}

struct InferArgs {
  std::string detector;
  std::string localizer;
  std::string trial;
};

int cmd_infer(const Globals& g, const InferArgs& a) {
  const auto det = clf::Detector::load(a.detector);
  const auto loc = clf::Localizer::load(a.localizer);
  const clf::Trial trial = clf::read_trial(a.trial);
  const auto scores = det.scores(trial);
  std::vector<std::size_t> fired;
  for (std::size_t f = 0; f < scores.size(); ++f) {
    if (scores[f] >= clf::kDecisionThreshold) fired.push_back(f);
  }
  const auto dists = loc.predict(trial, fired);
  std::ostringstream os;
  os << "frame,t_s,score,C,s_mm,force_N\n";
  std::size_t next = 0;
  for (std::size_t f = 0; f < scores.size(); ++f) {
    os << f << ',' << clf::format_real(trial.frames[f].t_s) << ',' << clf::format_real(scores[f]) << ',';
    if (next < fired.size() && fired[next] == f) {
      const clf::Decoded d = clf::decode(dists[next++], trial.grid);
      os << "1," << clf::format_real(d.s_mm) << ',' << clf::format_real(d.force_N) << '\n';
    } else {
      os << "0,,\n";
    }
  }
  if (g.out) {
    write_text(*g.out, os.str());
  } else {
    std::cout << os.str();
  }
  log_line("event=infer_done frames=" + std::to_string(scores.size()) + " contact_frames=" +
           std::to_string(fired.size()));
  return kOk;
}

struct ReplayArgs {
  std::string trial;
  double source_rate_hz = 100.0;
  double log_rate_hz = 20.0;
  double stop_force_N = 0.10;
};

int cmd_replay(const Globals& g, const ReplayArgs& a) {
  const clf::Trial src = clf::read_trial(a.trial);
  clf::Trial out = src;
  out.frames = clf::replay(src, a.source_rate_hz, a.log_rate_hz, a.stop_force_N);
  out.gt_force_N.clear();
  for (const auto& f : out.frames) out.gt_force_N.push_back(f.force_N);
  if (g.out) {
    clf::write_trial(out, *g.out);
  } else {
    clf::write_trial(out, std::cout);
  }
  log_line("event=replay_done source_frames=" + std::to_string(src.frames.size()) +
           " logged_frames=" + std::to_string(out.frames.size()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade contact detection, localization and force estimation from distributed strain"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out, data;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed")->check(CLI::NonNegativeNumber);
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads for cross-validation folds")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory (file for infer/replay)");
  auto* data_opt = app.add_option("--data", data, "Trial directory");
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset as trial CSV files");
  auto* train_detect = app.add_subcommand("train-detect", "Cross-validate and train the contact detector");
  auto* train_locate = app.add_subcommand("train-locate", "Train the localizer on all contact frames");
  auto* eval = app.add_subcommand("eval", "Leave-one-test-id evaluation, or evaluation of given checkpoints");
  EvalArgs eval_args;
  eval->add_option("--detector", eval_args.detector, "Detector checkpoint (skips cross-validation)");
  eval->add_option("--localizer", eval_args.localizer, "Localizer checkpoint (skips cross-validation)");
  eval->add_flag("--oracle", eval_args.oracle, "Use ground truth in place of both models");
  auto* infer = app.add_subcommand("infer", "Per-frame cascade output for one trial");
  InferArgs infer_args;
  infer->add_option("--detector", infer_args.detector, "Detector checkpoint")->required();
  infer->add_option("--localizer", infer_args.localizer, "Localizer checkpoint")->required();
  infer->add_option("trial", infer_args.trial, "Trial CSV")->required();
  auto* replay = app.add_subcommand("replay", "Re-log a trial through the newest-only logger");
  ReplayArgs replay_args;
  replay->add_option("trial", replay_args.trial, "Trial CSV")->required();
  replay->add_option("--source-rate", replay_args.source_rate_hz, "Source stream rate (Hz)");
  replay->add_option("--log-rate", replay_args.log_rate_hz, "Logger rate (Hz)");
  replay->add_option("--stop-force", replay_args.stop_force_N, "Stop after the first frame at or above this force (N)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kConfigFailure;
  }
  if (*seed_opt) g.seed = seed;
  if (*jobs_opt) g.jobs = jobs;
  if (*out_opt) g.out = out;
  if (*data_opt) g.data = data;

  try {
    if (*synth) return cmd_synth(g);
    if (*train_detect) return cmd_train_detect(g);
    if (*train_locate) return cmd_train_locate(g);
    if (*eval) return cmd_eval(g, eval_args);
    if (*infer) return cmd_infer(g, infer_args);
    if (*replay) return cmd_replay(g, replay_args);
  } catch (const clf::ConfigError& e) {
    log_line("event=error kind=config msg=" + kv_quote(e.what()));
    return kConfigFailure;
  } catch (const clf::IoError& e) {
    log_line("event=error kind=io msg=" + kv_quote(e.what()));
    return kIoFailure;
  } catch (const clf::ParseError& e) {
    log_line("event=error kind=io msg=" + kv_quote(e.what()));
    return kIoFailure;
  } catch (const clf::DivergenceError& e) {
    log_line("event=error kind=divergence msg=" + kv_quote(e.what()));
    return kDivergence;
  } catch (const std::exception& e) {
    log_line("event=error kind=other msg=" + kv_quote(e.what()));
    return kFailure;
  }
  return kFailure;
}
