#pragma once

// Detection-stage features: segment-mean downsampling and force-threshold labels.

#include <span>
#include <string>
#include <vector>

#include "clf/straincore.hpp"

namespace clf {

inline constexpr double kContactThresholdN = 0.01;

struct DetectionSample {
  std::vector<double> x;
  int y = 0;
  std::string group;
};

inline int label_contact(double force_N, double f_thresh_N = kContactThresholdN) {
  if (!(force_N >= 0.0)) throw DomainError("negative force " + std::to_string(force_N));
  return force_N >= f_thresh_N ? 1 : 0;
}

/// Sizes of k contiguous segments covering n indices; the first n mod k
/// segments hold one extra element.
inline std::vector<int> segment_sizes(int n, int k) {
  if (k < 1 || k > n) throw DomainError("downsample dimension " + std::to_string(k) + " outside [1, " +
                                        std::to_string(n) + "]");
  std::vector<int> sizes(static_cast<std::size_t>(k), n / k);
  for (int j = 0; j < n % k; ++j) ++sizes[static_cast<std::size_t>(j)];
  return sizes;
}

inline std::vector<double> downsample(std::span<const double> strain, int k) {
  const auto sizes = segment_sizes(static_cast<int>(strain.size()), k);
  std::vector<double> out;
  out.reserve(sizes.size());
  std::size_t pos = 0;
  for (int len : sizes) {
    double sum = 0.0;
    for (int i = 0; i < len; ++i) sum += strain[pos++];
    out.push_back(sum / static_cast<double>(len));
  }
  return out;
}

/// One sample per frame; labels come from the ground-truth force schedule.
inline std::vector<DetectionSample> build_detection_dataset(std::span<const Trial> trials, int k,
                                                            double f_thresh_N = kContactThresholdN) {
  std::vector<DetectionSample> samples;
  if (trials.empty()) return samples;
  const ArcGrid& grid = trials.front().grid;
  for (const Trial& t : trials) {
    if (!(t.grid == grid)) throw DomainError("trial " + t.test_id + " uses a different grid");
    for (std::size_t f = 0; f < t.frames.size(); ++f) {
      samples.push_back({downsample(t.frames[f].strain, k), label_contact(t.gt_force_N[f], f_thresh_N), t.test_id});
    }
  }
  return samples;
}

}  // namespace clf
