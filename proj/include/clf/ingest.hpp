#pragma once

// Trial files: one self-describing CSV per trial.
//
//   # schema=clf-trial/1
//   # test_id=cv_3
//   # side=cv
//   # length_mm=170
//   # n_nodes=263
//   # node_pitch_mm=0.648854961832061
//   # n_segments=64
//   # gt_contact_s_mm=56.2          (or "none")
//   t_s,motor_pos,force_N,gt_force_N,eps_000,...,eps_262
//   <one row per frame>
//
// Reals are written in shortest round-trip form, so read(write(t)) == t.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "clf/straincore.hpp"

namespace clf {

inline constexpr std::string_view kTrialSchema = "clf-trial/1";
inline constexpr int kFixedColumns = 4;

inline int trial_column_count(const ArcGrid& grid) { return kFixedColumns + grid.n_nodes; }

inline void append_real(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string format_real(double v) {
  std::string s;
  append_real(s, v);
  return s;
}

inline double parse_real(std::string_view text, std::size_t row) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("row " + std::to_string(row) + ": bad number '" + std::string(text) + "'");
  }
  return v;
}

inline std::string trial_column_names(const ArcGrid& grid) {
  std::string line = "t_s,motor_pos,force_N,gt_force_N";
  char name[16];
  for (int i = 0; i < grid.n_nodes; ++i) {
    std::snprintf(name, sizeof(name), ",eps_%03d", i);
    line += name;
  }
  return line;
}

inline void write_trial(const Trial& trial, std::ostream& os) {
  trial.validate();
  const ArcGrid& g = trial.grid;
  std::string out;
  out += "# schema=" + std::string(kTrialSchema) + "\n";
  out += "# test_id=" + trial.test_id + "\n";
  out += "# side=" + std::string(side_tag(trial.side)) + "\n";
  out += "# length_mm=" + format_real(g.length_mm) + "\n";
  out += "# n_nodes=" + std::to_string(g.n_nodes) + "\n";
  out += "# node_pitch_mm=" + format_real(g.node_pitch_mm) + "\n";
  out += "# n_segments=" + std::to_string(g.n_segments) + "\n";
  out += "# gt_contact_s_mm=" + (trial.gt_contact_s_mm ? format_real(*trial.gt_contact_s_mm) : std::string("none")) +
         "\n";
  out += trial_column_names(g) + "\n";
  os << out;
  for (std::size_t k = 0; k < trial.frames.size(); ++k) {
    const StrainFrame& f = trial.frames[k];
    out.clear();
    append_real(out, f.t_s);
    out += ',';
    append_real(out, f.motor_pos);
    out += ',';
    append_real(out, f.force_N);
    out += ',';
    append_real(out, trial.gt_force_N[k]);
    for (double e : f.strain) {
      out += ',';
      append_real(out, e);
    }
    out += '\n';
    os << out;
  }
}

inline void write_trial(const Trial& trial, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_trial(trial, os);
  os.flush();
  if (!os) throw IoError("write failed for '" + path + "'");
}

struct ReadDiagnostics {
  std::vector<std::string> warnings;
};

/// Parses a trial file. Errors name the 1-based line number.
inline Trial read_trial(std::istream& is, ReadDiagnostics* diag = nullptr) {
  std::map<std::string, std::string, std::less<>> header;
  std::string line;
  std::size_t lineno = 0;
  bool have_names = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw ParseError("row " + std::to_string(lineno) + ": malformed header line (expected key=value)");
      }
      header.emplace(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
      continue;
    }
    have_names = true;
    break;
  }

  auto need = [&](std::string_view key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end()) throw ParseError("missing header key '" + std::string(key) + "'");
    return it->second;
  };
  if (need("schema") != kTrialSchema) throw ParseError("unsupported schema '" + need("schema") + "'");

  Trial trial;
  trial.test_id = need("test_id");
  trial.side = parse_side(need("side"));
  try {
    trial.grid.length_mm = parse_real(need("length_mm"), 0);
    trial.grid.n_nodes = std::stoi(need("n_nodes"));
    trial.grid.node_pitch_mm = parse_real(need("node_pitch_mm"), 0);
    trial.grid.n_segments = std::stoi(need("n_segments"));
  } catch (const std::logic_error&) {
    throw ParseError("malformed grid header");
  }
  const std::string& gt = need("gt_contact_s_mm");
  if (gt != "none") trial.gt_contact_s_mm = parse_real(gt, 0);
  try {
    trial.grid.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("header: ") + e.what());
  }

  const int expected = trial_column_count(trial.grid);
  if (!have_names) {
    throw ParseError("missing column-name row");
  }
  if (line != trial_column_names(trial.grid)) {
    throw ParseError("row " + std::to_string(lineno) + ": column-name row does not match header (expected " +
                     std::to_string(expected) + " columns)");
  }

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(expected));
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    values.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_real(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<int>(values.size()) != expected) {
      throw ParseError("row " + std::to_string(lineno) + ": expected " + std::to_string(expected) + " columns, got " +
                       std::to_string(values.size()));
    }
    StrainFrame f;
    f.t_s = values[0];
    f.motor_pos = values[1];
    f.force_N = values[2];
    f.strain.assign(values.begin() + kFixedColumns, values.end());
    if (!trial.frames.empty() && f.t_s < trial.frames.back().t_s) {
      throw ParseError("row " + std::to_string(lineno) + ": timestamp decreases");
    }
    trial.frames.push_back(std::move(f));
    trial.gt_force_N.push_back(values[3]);
  }
  if (trial.frames.empty() && diag) {
    diag->warnings.push_back("trial " + trial.test_id + " has no data rows");
  }
  return trial;
}

inline Trial read_trial(const std::string& path, ReadDiagnostics* diag = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return read_trial(is, diag);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace detail {

inline StrainFrame lerp_frame(const StrainFrame& a, const StrainFrame& b, double w) {
  StrainFrame out;
  out.t_s = a.t_s + w * (b.t_s - a.t_s);
  out.motor_pos = a.motor_pos + w * (b.motor_pos - a.motor_pos);
  out.force_N = a.force_N + w * (b.force_N - a.force_N);
  out.strain.resize(a.strain.size());
  for (std::size_t i = 0; i < a.strain.size(); ++i) out.strain[i] = a.strain[i] + w * (b.strain[i] - a.strain[i]);
  return out;
}

// Source sample at time t; exact copy when t hits a recorded frame.
inline StrainFrame sample_at(const Trial& trial, double t) {
  const auto& fr = trial.frames;
  std::size_t hi = 0;
  {
    std::size_t lo = 0, n = fr.size();
    while (lo < n) {
      const std::size_t mid = lo + (n - lo) / 2;
      if (fr[mid].t_s <= t) lo = mid + 1; else n = mid;
    }
    hi = lo;  // first frame with t_s > t
  }
  if (hi == 0) return fr.front();
  const StrainFrame& a = fr[hi - 1];
  if (a.t_s == t || hi == fr.size()) return a;
  const StrainFrame& b = fr[hi];
  const double w = (t - a.t_s) / (b.t_s - a.t_s);
  StrainFrame out = lerp_frame(a, b, w);
  out.t_s = t;
  return out;
}

}  // namespace detail

/// Emulates a source streaming at source_rate_hz and a logger that, at each
/// log tick, takes only the newest source frame. Source frames are linearly
/// interpolated from the trial. Logging stops after the first frame whose
/// force reading reaches stop_force_N.
inline std::vector<StrainFrame> replay(const Trial& trial, double source_rate_hz, double log_rate_hz,
                                       double stop_force_N = 0.10) {
  if (!(log_rate_hz > 0.0) || !(source_rate_hz >= log_rate_hz)) {
    throw DomainError("replay requires source_rate >= log_rate > 0");
  }
  std::vector<StrainFrame> out;
  if (trial.frames.empty()) return out;
  const double t0 = trial.frames.front().t_s;
  const double t_end = trial.frames.back().t_s;
  long last_source = -1;
  for (long m = 0;; ++m) {
    const double tick = static_cast<double>(m) / log_rate_hz;
    if (t0 + tick > t_end) break;
    // Newest source index n with n / source_rate <= tick.
    long n = static_cast<long>(std::floor(tick * source_rate_hz));
    while (static_cast<double>(n) / source_rate_hz > tick) --n;
    while (static_cast<double>(n + 1) / source_rate_hz <= tick) ++n;
    if (n == last_source) continue;
    last_source = n;
    StrainFrame f = detail::sample_at(trial, t0 + static_cast<double>(n) / source_rate_hz);
    const bool stop = f.force_N >= stop_force_N;
    out.push_back(std::move(f));
    if (stop) break;
  }
  return out;
}

}  // namespace clf
