#pragma once

// Arc-length geometry and the shared domain vocabulary.
//
// Units: millimeters for lengths, newtons for forces, seconds for time.
// Strain values are microstrain.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clf {

// Error taxonomy. The CLI maps each kind onto its own exit code.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Side { convex, concave };

inline std::string_view side_tag(Side side) {
  return side == Side::convex ? "cv" : "cc";
}

inline Side parse_side(std::string_view text) {
  if (text == "cv" || text == "convex") return Side::convex;
  if (text == "cc" || text == "concave") return Side::concave;
  throw ParseError("unknown side '" + std::string(text) + "'");
}

// +1 for tensile (convex), -1 for compressive (concave).
inline double side_sign(Side side) { return side == Side::convex ? 1.0 : -1.0; }

/// Arc-length discretization shared by the sensor nodes and the 64 output
/// segments. Build with `ArcGrid::make` so the node pitch fits inside L.
struct ArcGrid {
  double length_mm = 170.0;
  int n_nodes = 263;
  double node_pitch_mm = 0.0;
  int n_segments = 64;

  static ArcGrid make(double length_mm = 170.0, int n_nodes = 263, int n_segments = 64) {
    ArcGrid g;
    g.length_mm = length_mm;
    g.n_nodes = n_nodes;
    g.n_segments = n_segments;
    if (!(length_mm > 0.0) || n_nodes < 2 || n_segments < 1) {
      throw DomainError("invalid grid: need length > 0, n_nodes >= 2, n_segments >= 1");
    }
    // Nominal OFDR pitch is 0.65 mm; 262 * 0.65 overshoots 170 mm, so the
    // pitch is derived from the length and rounded down until the last node fits.
    double pitch = length_mm / static_cast<double>(n_nodes - 1);
    while (static_cast<double>(n_nodes - 1) * pitch > length_mm) {
      pitch = std::nextafter(pitch, 0.0);
    }
    g.node_pitch_mm = pitch;
    return g;
  }

  double segment_len_mm() const { return length_mm / static_cast<double>(n_segments); }

  double node_position(int i) const { return static_cast<double>(i) * node_pitch_mm; }

  std::vector<double> node_positions() const {
    std::vector<double> s(static_cast<std::size_t>(n_nodes));
    for (int i = 0; i < n_nodes; ++i) s[static_cast<std::size_t>(i)] = node_position(i);
    return s;
  }

  void validate() const {
    if (!(length_mm > 0.0) || n_nodes < 2 || n_segments < 1 || !(node_pitch_mm > 0.0)) {
      throw DomainError("invalid grid parameters");
    }
    if (node_position(n_nodes - 1) > length_mm) {
      throw DomainError("last strain node lies beyond the manipulator length");
    }
  }

  bool operator==(const ArcGrid&) const = default;
};

inline const ArcGrid& default_grid() {
  static const ArcGrid grid = ArcGrid::make();
  return grid;
}

/// Index j of the segment containing s, with j*dL <= s < (j+1)*dL and the
/// right end s = L closed into the last segment.
inline int segment_index(const ArcGrid& grid, double s_mm) {
  if (!(s_mm >= 0.0 && s_mm <= grid.length_mm)) {
    throw DomainError("arc length " + std::to_string(s_mm) + " mm outside [0, L]");
  }
  const double dl = grid.segment_len_mm();
  const int last = grid.n_segments - 1;
  int j = static_cast<int>(std::floor(s_mm / dl));
  if (j > last) j = last;
  // Settle against the boundaries as actually represented in floating point.
  while (j > 0 && s_mm < static_cast<double>(j) * dl) --j;
  while (j < last && s_mm >= static_cast<double>(j + 1) * dl) ++j;
  return j;
}

inline double segment_center(const ArcGrid& grid, int j) {
  if (j < 0 || j >= grid.n_segments) {
    throw DomainError("segment index " + std::to_string(j) + " out of range");
  }
  return (static_cast<double>(j) + 0.5) * grid.segment_len_mm();
}

/// One time sample of the distributed strain field.
struct StrainFrame {
  double t_s = 0.0;
  std::vector<double> strain;
  double motor_pos = 0.0;
  double force_N = 0.0;

  bool operator==(const StrainFrame&) const = default;
};

/// A labeled run. `gt_force_N` is parallel to `frames`.
struct Trial {
  std::string test_id;
  Side side = Side::convex;
  ArcGrid grid = default_grid();
  std::optional<double> gt_contact_s_mm;
  std::vector<StrainFrame> frames;
  std::vector<double> gt_force_N;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  double duration_s() const { return frames.empty() ? 0.0 : frames.back().t_s - frames.front().t_s; }

  void validate() const {
    grid.validate();
    if (gt_force_N.size() != frames.size()) {
      throw DomainError("trial " + test_id + ": ground-truth schedule length differs from frame count");
    }
    if (gt_contact_s_mm && !(*gt_contact_s_mm >= 0.0 && *gt_contact_s_mm <= grid.length_mm)) {
      throw DomainError("trial " + test_id + ": contact location outside [0, L]");
    }
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].strain.size() != static_cast<std::size_t>(grid.n_nodes)) {
        throw DomainError("trial " + test_id + ": frame " + std::to_string(k) + " has wrong strain length");
      }
      if (k > 0 && frames[k].t_s < frames[k - 1].t_s) {
        throw DomainError("trial " + test_id + ": timestamps decrease at frame " + std::to_string(k));
      }
    }
  }

  bool operator==(const Trial&) const = default;
};

/// True for ids of the form cv_1..cv_8 / cc_1..cc_8.
inline bool is_paper_test_id(std::string_view id) {
  return id.size() == 4 && (id.substr(0, 3) == "cv_" || id.substr(0, 3) == "cc_") && id[3] >= '1' &&
         id[3] <= '8';
}

}  // namespace clf
