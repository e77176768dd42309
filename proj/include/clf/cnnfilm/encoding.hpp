#pragma once

// Force-scaled Gaussian targets over the arc-length segments and the
// max/argmax decode used at inference.

#include <cmath>
#include <span>
#include <vector>

#include "clf/straincore.hpp"

namespace clf {

/// Predicted or encoded force per segment, in newtons.
using ForceDistribution = std::vector<double>;

/// tau_j = F * exp(-(s_j - s_c)^2 / (2 sigma^2)) at segment centers s_j.
inline ForceDistribution encode_targets(double force_N, double contact_s_mm, double sigma_mm, const ArcGrid& grid) {
  if (!(sigma_mm > 0.0)) throw DomainError("sigma must be > 0");
  if (!(force_N >= 0.0)) throw DomainError("force must be >= 0");
  if (!(contact_s_mm >= 0.0 && contact_s_mm <= grid.length_mm)) throw DomainError("contact location outside [0, L]");
  ForceDistribution tau(static_cast<std::size_t>(grid.n_segments));
  const double inv = 1.0 / (2.0 * sigma_mm * sigma_mm);
  for (int j = 0; j < grid.n_segments; ++j) {
    const double d = segment_center(grid, j) - contact_s_mm;
    tau[static_cast<std::size_t>(j)] = force_N * std::exp(-d * d * inv);
  }
  return tau;
}

struct Decoded {
  double force_N = 0.0;
  double s_mm = 0.0;
  int segment = 0;
};

/// Peak value and location; ties resolve to the lowest index.
inline Decoded decode(std::span<const double> tau, const ArcGrid& grid) {
  if (static_cast<int>(tau.size()) != grid.n_segments) {
    throw DomainError("force distribution has " + std::to_string(tau.size()) + " bins, expected " +
                      std::to_string(grid.n_segments));
  }
  int best = 0;
  for (int j = 1; j < grid.n_segments; ++j) {
    if (tau[static_cast<std::size_t>(j)] > tau[static_cast<std::size_t>(best)]) best = j;
  }
  return {tau[static_cast<std::size_t>(best)], segment_center(grid, best), best};
}

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw DomainError("loss_mse: length mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

}  // namespace clf
