#pragma once

// Synthetic trial generator: half-sine bending strain, a Gaussian strain bump
// at the contact point, Gaussian sensor noise, and the logger's 0.10 N stop rule.
//
// Curvature amplitudes are expressed per kilometer so that
// strain [microstrain] = curvature [1/km] * fiber offset [mm].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clf/straincore.hpp"

namespace clf {

struct ContactModel {
  double gain_microstrain_per_N = 5000.0;  // bump peak per newton on the convex side
  double width_mm = 8.0;                   // Gaussian width of the bump
  double concave_contrast = 0.6;           // compressive side sees a weaker signature
};

struct SynthConfig {
  ArcGrid grid = default_grid();
  std::string test_id = "cv_1";
  Side side = Side::convex;
  std::optional<double> contact_s_mm;  // absent: no-contact trial
  double fiber_offset_mm = 0.3;
  double noise_std_microstrain = 2.0;
  double frame_rate_hz = 20.0;
  double max_force_N = 0.10;
  double force_ramp_N_per_s = 0.02;
  double approach_s = 3.0;             // contact onset time
  double motor_speed = 1.0;            // device units per second before contact
  double contact_speed_ratio = 0.25;   // motor speed after onset, relative
  double curvature_per_motor = 800.0;  // 1/km of half-sine amplitude per device unit
  ContactModel contact;
  std::uint64_t seed = 0;

  void validate() const {
    grid.validate();
    if (contact_s_mm && !(*contact_s_mm >= 0.0 && *contact_s_mm <= grid.length_mm)) {
      throw DomainError("contact location outside [0, L]");
    }
    if (!(frame_rate_hz > 0.0)) throw DomainError("frame_rate_hz must be > 0");
    if (!(noise_std_microstrain >= 0.0)) throw DomainError("noise_std_microstrain must be >= 0");
    if (!(fiber_offset_mm > 0.0)) throw DomainError("fiber_offset_mm must be > 0");
    if (!(max_force_N > 0.0)) throw DomainError("max_force_N must be > 0");
    if (!(force_ramp_N_per_s > 0.0)) throw DomainError("force ramp must be > 0");
    if (!(approach_s >= 0.0)) throw DomainError("approach_s must be >= 0");
    if (!(motor_speed >= 0.0) || !(contact_speed_ratio >= 0.0)) throw DomainError("motor speeds must be >= 0");
    if (!(contact.width_mm > 0.0)) throw DomainError("contact width must be > 0");
  }
};

/// eps_i = sign(side) * A * sin(pi s_i / L) * offset.
inline std::vector<double> baseline_strain(const ArcGrid& grid, double curvature_amplitude, Side side,
                                           double fiber_offset_mm) {
  std::vector<double> eps(static_cast<std::size_t>(grid.n_nodes));
  const double scale = side_sign(side) * curvature_amplitude * fiber_offset_mm;
  for (int i = 0; i < grid.n_nodes; ++i) {
    eps[static_cast<std::size_t>(i)] = scale * std::sin(std::numbers::pi * grid.node_position(i) / grid.length_mm);
  }
  return eps;
}

/// Localized strain bump, linear in force. Positive on both sides; the
/// concave side is scaled by the contrast factor.
inline std::vector<double> contact_perturbation(const ArcGrid& grid, double contact_s_mm, double force_N, Side side,
                                                const ContactModel& model = {}) {
  if (!(contact_s_mm >= 0.0 && contact_s_mm <= grid.length_mm)) {
    throw DomainError("contact location outside [0, L]");
  }
  if (!(force_N >= 0.0)) throw DomainError("force must be >= 0");
  const double contrast = side == Side::convex ? 1.0 : model.concave_contrast;
  const double peak = contrast * model.gain_microstrain_per_N * force_N;
  const double inv_two_w2 = 1.0 / (2.0 * model.width_mm * model.width_mm);
  std::vector<double> bump(static_cast<std::size_t>(grid.n_nodes), 0.0);
  if (peak == 0.0) return bump;
  for (int i = 0; i < grid.n_nodes; ++i) {
    const double d = grid.node_position(i) - contact_s_mm;
    bump[static_cast<std::size_t>(i)] = peak * std::exp(-d * d * inv_two_w2);
  }
  return bump;
}

namespace detail {

inline double onset_s(const SynthConfig& cfg) { return cfg.approach_s; }

inline double motor_at(const SynthConfig& cfg, double t) {
  const double onset = onset_s(cfg);
  const double travel = t <= onset ? cfg.motor_speed * t
                                   : cfg.motor_speed * onset + cfg.motor_speed * cfg.contact_speed_ratio * (t - onset);
  return side_sign(cfg.side) * travel;
}

// Contact trials and no-contact trials share the same timeline.
inline double force_at(const SynthConfig& cfg, double t) {
  const double dt = t - onset_s(cfg);
  return dt > 0.0 ? cfg.force_ramp_N_per_s * dt : 0.0;
}

}  // namespace detail

/// Runs one emulated acquisition. Frames are logged at frame_rate_hz; the
/// trial stops at the first frame whose force reading reaches max_force_N.
/// A no-contact trial follows the same motor profile and stops at the frame
/// where a contact trial would have stopped.
inline Trial simulate_trial(const SynthConfig& cfg) {
  cfg.validate();
  Trial trial;
  trial.test_id = cfg.test_id;
  trial.side = cfg.side;
  trial.grid = cfg.grid;
  trial.gt_contact_s_mm = cfg.contact_s_mm;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = cfg.noise_std_microstrain;

  constexpr long kMaxFrames = 1'000'000;
  for (long k = 0; k < kMaxFrames; ++k) {
    const double t = static_cast<double>(k) / cfg.frame_rate_hz;
    const double motor = detail::motor_at(cfg, t);
    const double ramp_force = detail::force_at(cfg, t);
    const double force = cfg.contact_s_mm ? ramp_force : 0.0;

    StrainFrame frame;
    frame.t_s = t;
    frame.motor_pos = motor;
    frame.force_N = force;
    frame.strain = baseline_strain(cfg.grid, cfg.curvature_per_motor * std::abs(motor), cfg.side, cfg.fiber_offset_mm);
    if (cfg.contact_s_mm && force > 0.0) {
      const auto bump = contact_perturbation(cfg.grid, *cfg.contact_s_mm, force, cfg.side, cfg.contact);
      for (std::size_t i = 0; i < bump.size(); ++i) frame.strain[i] += bump[i];
    }
    if (sigma > 0.0) {
      for (double& e : frame.strain) e += sigma * noise(rng);
    }
    trial.frames.push_back(std::move(frame));
    trial.gt_force_N.push_back(force);
    if (ramp_force >= cfg.max_force_N) break;
  }
  return trial;
}

struct DatasetOptions {
  std::vector<int> location_segments = {7, 14, 21, 28, 35, 42, 49, 56};  // obstacle at these segment centers
  std::vector<double> locations_mm;  // explicit positions; overrides location_segments when non-empty
  int repetitions = 3;
  int no_contact_trials = 0;
  double location_jitter_mm = 0.0;  // per-repetition uniform jitter of the obstacle position
  double approach_min_s = 2.75;     // onset drawn uniformly per trial
  double approach_max_s = 3.25;
};

/// 8 locations x 2 sides x 3 repetitions; repetitions share a test id
/// (cv_i / cc_i). No-contact trials, when requested, are labeled nc_1, nc_2, ...
inline std::vector<Trial> make_paper_shaped_dataset(const SynthConfig& base, std::uint64_t seed,
                                                    const DatasetOptions& opts = {}) {
  if (opts.repetitions < 1) throw DomainError("repetitions must be >= 1");
  if (opts.approach_max_s < opts.approach_min_s) throw DomainError("approach range is empty");
  std::vector<double> locations = opts.locations_mm;
  if (locations.empty()) {
    for (int j : opts.location_segments) locations.push_back(segment_center(base.grid, j));
  }
  std::vector<Trial> trials;
  std::uint64_t index = 0;
  auto trial_rng = [&](std::uint64_t idx) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(idx), 0x5eedu};
    return std::mt19937_64(seq);
  };
  for (Side side : {Side::convex, Side::concave}) {
    for (std::size_t loc = 0; loc < locations.size(); ++loc) {
      for (int rep = 0; rep < opts.repetitions; ++rep) {
        auto rng = trial_rng(index++);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        SynthConfig cfg = base;
        cfg.side = side;
        cfg.test_id = std::string(side_tag(side)) + "_" + std::to_string(loc + 1);
        const double jitter = opts.location_jitter_mm * (2.0 * unit(rng) - 1.0);
        cfg.contact_s_mm = std::clamp(locations[loc] + jitter, 0.0, base.grid.length_mm);
        cfg.approach_s = opts.approach_min_s + (opts.approach_max_s - opts.approach_min_s) * unit(rng);
        cfg.seed = rng();
        trials.push_back(simulate_trial(cfg));
      }
    }
  }
  for (int n = 0; n < opts.no_contact_trials; ++n) {
    auto rng = trial_rng(index++);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SynthConfig cfg = base;
    cfg.side = n % 2 == 0 ? Side::convex : Side::concave;
    cfg.test_id = "nc_" + std::to_string(n + 1);
    cfg.contact_s_mm.reset();
    cfg.approach_s = opts.approach_min_s + (opts.approach_max_s - opts.approach_min_s) * unit(rng);
    cfg.seed = rng();
    trials.push_back(simulate_trial(cfg));
  }
  return trials;
}

}  // namespace clf
