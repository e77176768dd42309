#pragma once

// Run configuration: one JSON object, every key optional, unknown keys
// rejected. Field reference in docs/format.md.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "clf/cnnfilm/arch.hpp"
#include "clf/cnnfilm/train.hpp"
#include "clf/features.hpp"
#include "clf/gbdt.hpp"
#include "clf/synth.hpp"

namespace clf {

struct CnnConfig {
  cnn::CnnFilmArch arch;
  double sigma_mm = 0.0;  // <= 0: one segment length
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int frame_stride = 2;  // keep every n-th contact frame for training

  double sigma(const ArcGrid& grid) const { return sigma_mm > 0.0 ? sigma_mm : grid.segment_len_mm(); }

  cnn::TrainOptions train_options(std::uint64_t seed) const {
    cnn::TrainOptions o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.learning_rate = learning_rate;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.adam_eps = adam_eps;
    o.seed = seed;
    return o;
  }
};

struct RunConfig {
  std::uint64_t seed = 7;
  int jobs = 1;
  SynthConfig synth;  // synth.grid is the run's grid
  DatasetOptions dataset;
  int feature_k = 32;
  double contact_threshold_N = kContactThresholdN;
  GbdtParams gbdt;
  CnnConfig cnn;
  bool oracle = false;
  std::string data_dir = "data";
  std::string out_dir = "out";

  const ArcGrid& grid() const { return synth.grid; }

  void validate() const {
    try {
      synth.validate();
      gbdt.validate();
      cnn.arch.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (feature_k < 1 || feature_k > grid().n_nodes) throw ConfigError("features.k outside [1, n_nodes]");
    if (!(contact_threshold_N > 0.0)) throw ConfigError("features.contact_threshold_N must be > 0");
    if (cnn.arch.input_len != grid().n_nodes) throw ConfigError("cnn.arch.input_len must equal grid.n_nodes");
    if (cnn.arch.n_out != grid().n_segments) throw ConfigError("cnn.arch.n_out must equal grid.n_segments");
    if (cnn.epochs < 0 || cnn.batch_size < 1 || !(cnn.learning_rate > 0.0)) throw ConfigError("invalid cnn optimizer");
    if (cnn.frame_stride < 1) throw ConfigError("cnn.frame_stride must be >= 1");
    if (dataset.repetitions < 1 || dataset.no_contact_trials < 0) throw ConfigError("invalid dataset counts");
  }
};

namespace detail {

// Reads keys from one JSON object and remembers which ones were used.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_;
    if (key) p += p.empty() ? std::string(key) : "." + std::string(key);
    return p.empty() ? "config" : "'" + p + "'";
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const SynthConfig& s = c.synth;
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["grid"] = {{"length_mm", s.grid.length_mm}, {"n_nodes", s.grid.n_nodes}, {"n_segments", s.grid.n_segments}};
  j["synth"] = {{"fiber_offset_mm", s.fiber_offset_mm},
                {"noise_std_microstrain", s.noise_std_microstrain},
                {"frame_rate_hz", s.frame_rate_hz},
                {"max_force_N", s.max_force_N},
                {"force_ramp_N_per_s", s.force_ramp_N_per_s},
                {"motor_speed", s.motor_speed},
                {"contact_speed_ratio", s.contact_speed_ratio},
                {"curvature_per_motor", s.curvature_per_motor},
                {"contact_gain_microstrain_per_N", s.contact.gain_microstrain_per_N},
                {"contact_width_mm", s.contact.width_mm},
                {"concave_contrast", s.contact.concave_contrast}};
  const DatasetOptions& d = c.dataset;
  j["dataset"] = {{"location_segments", d.location_segments},
                  {"locations_mm", d.locations_mm},
                  {"repetitions", d.repetitions},
                  {"no_contact_trials", d.no_contact_trials},
                  {"location_jitter_mm", d.location_jitter_mm},
                  {"approach_min_s", d.approach_min_s},
                  {"approach_max_s", d.approach_max_s}};
  j["features"] = {{"k", c.feature_k}, {"contact_threshold_N", c.contact_threshold_N}};
  const GbdtParams& g = c.gbdt;
  j["gbdt"] = {{"n_trees", g.n_trees},     {"max_depth", g.max_depth},   {"learning_rate", g.learning_rate},
               {"min_samples_leaf", g.min_samples_leaf}, {"subsample", g.subsample}, {"l2", g.l2},
               {"class_weights", nullptr}};
  if (g.class_weights) j["gbdt"]["class_weights"] = {g.class_weights->first, g.class_weights->second};
  const CnnConfig& n = c.cnn;
  j["cnn"] = {{"arch", n.arch.to_json()}, {"sigma_mm", n.sigma_mm},         {"epochs", n.epochs},
              {"batch_size", n.batch_size}, {"learning_rate", n.learning_rate}, {"beta1", n.beta1},
              {"beta2", n.beta2},           {"adam_eps", n.adam_eps},           {"frame_stride", n.frame_stride}};
  j["eval"] = {{"oracle", c.oracle}};
  j["paths"] = {{"data_dir", c.data_dir}, {"out_dir", c.out_dir}};
  return j;
}

/// Overlays `j` onto the defaults. Throws ConfigError on unknown keys, wrong
/// types or invalid values.
inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::ObjectReader root(j, "");
  root.get("seed", c.seed);
  root.get("jobs", c.jobs);
  if (const auto* gj = root.child("grid")) {
    detail::ObjectReader r(*gj, "grid");
    double length = c.synth.grid.length_mm;
    int nodes = c.synth.grid.n_nodes, segs = c.synth.grid.n_segments;
    r.get("length_mm", length);
    r.get("n_nodes", nodes);
    r.get("n_segments", segs);
    r.finish();
    try {
      c.synth.grid = ArcGrid::make(length, nodes, segs);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  if (const auto* sj = root.child("synth")) {
    detail::ObjectReader r(*sj, "synth");
    SynthConfig& s = c.synth;
    r.get("fiber_offset_mm", s.fiber_offset_mm);
    r.get("noise_std_microstrain", s.noise_std_microstrain);
    r.get("frame_rate_hz", s.frame_rate_hz);
    r.get("max_force_N", s.max_force_N);
    r.get("force_ramp_N_per_s", s.force_ramp_N_per_s);
    r.get("motor_speed", s.motor_speed);
    r.get("contact_speed_ratio", s.contact_speed_ratio);
    r.get("curvature_per_motor", s.curvature_per_motor);
    r.get("contact_gain_microstrain_per_N", s.contact.gain_microstrain_per_N);
    r.get("contact_width_mm", s.contact.width_mm);
    r.get("concave_contrast", s.contact.concave_contrast);
    r.finish();
  }
  if (const auto* dj = root.child("dataset")) {
    detail::ObjectReader r(*dj, "dataset");
    DatasetOptions& d = c.dataset;
    r.get("location_segments", d.location_segments);
    r.get("locations_mm", d.locations_mm);
    r.get("repetitions", d.repetitions);
    r.get("no_contact_trials", d.no_contact_trials);
    r.get("location_jitter_mm", d.location_jitter_mm);
    r.get("approach_min_s", d.approach_min_s);
    r.get("approach_max_s", d.approach_max_s);
    r.finish();
  }
  if (const auto* fj = root.child("features")) {
    detail::ObjectReader r(*fj, "features");
    r.get("k", c.feature_k);
    r.get("contact_threshold_N", c.contact_threshold_N);
    r.finish();
  }
  if (const auto* gj = root.child("gbdt")) {
    detail::ObjectReader r(*gj, "gbdt");
    GbdtParams& g = c.gbdt;
    r.get("n_trees", g.n_trees);
    r.get("max_depth", g.max_depth);
    r.get("learning_rate", g.learning_rate);
    r.get("min_samples_leaf", g.min_samples_leaf);
    r.get("subsample", g.subsample);
    r.get("l2", g.l2);
    if (const auto* w = r.child("class_weights"); w && !w->is_null()) {
      if (!w->is_array() || w->size() != 2) throw ConfigError("'gbdt.class_weights' must be null or [neg, pos]");
      try {
        g.class_weights = std::pair(w->at(0).get<double>(), w->at(1).get<double>());
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("'gbdt.class_weights' must hold numbers");
      }
    }
    r.finish();
  }
  if (const auto* nj = root.child("cnn")) {
    detail::ObjectReader r(*nj, "cnn");
    CnnConfig& n = c.cnn;
    if (const auto* aj = r.child("arch")) {
      if (!aj->is_object()) throw ConfigError("'cnn.arch' must be an object");
      nlohmann::json merged = n.arch.to_json();
      for (const auto& [k, v] : aj->items()) {
        if (!merged.contains(k)) throw ConfigError("unknown config key 'cnn.arch." + k + "'");
        merged[k] = v;
      }
      try {
        n.arch = cnn::CnnFilmArch::from_json(merged);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cnn.arch: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(std::string("cnn.arch: ") + e.what());
      }
    }
    r.get("sigma_mm", n.sigma_mm);
    r.get("epochs", n.epochs);
    r.get("batch_size", n.batch_size);
    r.get("learning_rate", n.learning_rate);
    r.get("beta1", n.beta1);
    r.get("beta2", n.beta2);
    r.get("adam_eps", n.adam_eps);
    r.get("frame_stride", n.frame_stride);
    r.finish();
  }
  if (const auto* ej = root.child("eval")) {
    detail::ObjectReader r(*ej, "eval");
    r.get("oracle", c.oracle);
    r.finish();
  }
  if (const auto* pj = root.child("paths")) {
    detail::ObjectReader r(*pj, "paths");
    r.get("data_dir", c.data_dir);
    r.get("out_dir", c.out_dir);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace clf
