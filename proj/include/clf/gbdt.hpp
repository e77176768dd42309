#pragma once

// Gradient-boosted regression trees on the logistic loss, for binary contact
// detection.
//
// Each stage fits one tree to the negative gradient (y - p) with exact greedy
// variance-reduction splits, then sets every leaf to a damped Newton step
//   value = sum w (y - p) / (sum w p (1 - p) + l2).
// Trees are grown level by level over presorted feature columns, so one
// level costs O(n_samples * n_features).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clf/features.hpp"
#include "clf/straincore.hpp"

namespace clf {

struct GbdtParams {
  int n_trees = 300;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double subsample = 1.0;
  double l2 = 1.0;
  // Optional per-class sample weights {negative, positive}.
  std::optional<std::pair<double, double>> class_weights;

  void validate() const {
    if (n_trees < 0) throw DomainError("n_trees must be >= 0");
    if (max_depth < 1) throw DomainError("max_depth must be >= 1");
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
    if (min_samples_leaf < 1) throw DomainError("min_samples_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw DomainError("subsample must be in (0, 1]");
    if (!(l2 >= 0.0)) throw DomainError("l2 must be >= 0");
    if (class_weights && !(class_weights->first > 0.0 && class_weights->second > 0.0)) {
      throw DomainError("class weights must be > 0");
    }
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // x[feature] <= threshold goes left.
  double predict(std::span<const double> x) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(id)];
      id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
  }

  bool operator==(const Tree&) const = default;
};

inline constexpr double kProbClamp = 1e-7;

inline double sigmoid(double m) {
  return m >= 0.0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double logistic_loss(double margin, int y) {
  const double p = std::clamp(sigmoid(margin), kProbClamp, 1.0 - kProbClamp);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

class GbdtModel {
 public:
  GbdtModel() = default;

  int n_features() const { return n_features_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const GbdtParams& params() const { return params_; }

  /// Log-odds using at most `max_trees` stages.
  double predict_margin(std::span<const double> x,
                        std::size_t max_trees = std::numeric_limits<std::size_t>::max()) const {
    if (static_cast<int>(x.size()) != n_features_) {
      throw DomainError("expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
    }
    double m = base_score_;
    const std::size_t n = std::min(max_trees, trees_.size());
    for (std::size_t t = 0; t < n; ++t) m += learning_rate_ * trees_[t].predict(x);
    return m;
  }

  /// Contact probability, strictly inside (0, 1).
  double predict_proba(std::span<const double> x) const {
    const double p = sigmoid(predict_margin(x));
    return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  }

  int classify(std::span<const double> x, double threshold = 0.5) const {
    return predict_proba(x) >= threshold ? 1 : 0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "clf-gbdt";
    j["version"] = 1;
    j["n_features"] = n_features_;
    j["base_score"] = base_score_;
    j["learning_rate"] = learning_rate_;
    j["params"] = {{"n_trees", params_.n_trees},
                   {"max_depth", params_.max_depth},
                   {"learning_rate", params_.learning_rate},
                   {"min_samples_leaf", params_.min_samples_leaf},
                   {"subsample", params_.subsample},
                   {"l2", params_.l2}};
    if (params_.class_weights) {
      j["params"]["class_weights"] = {params_.class_weights->first, params_.class_weights->second};
    }
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) {
      nlohmann::json jt;
      std::vector<int> feature, left, right;
      std::vector<double> threshold, value;
      for (const TreeNode& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
      }
      jt["feature"] = feature;
      jt["threshold"] = threshold;
      jt["left"] = left;
      jt["right"] = right;
      jt["value"] = value;
      trees.push_back(std::move(jt));
    }
    j["trees"] = std::move(trees);
    return j;
  }

  static GbdtModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "clf-gbdt" || j.at("version") != 1) throw ParseError("not a clf-gbdt v1 model");
      GbdtModel m;
      m.n_features_ = j.at("n_features").get<int>();
      m.base_score_ = j.at("base_score").get<double>();
      m.learning_rate_ = j.at("learning_rate").get<double>();
      const auto& p = j.at("params");
      m.params_.n_trees = p.at("n_trees").get<int>();
      m.params_.max_depth = p.at("max_depth").get<int>();
      m.params_.learning_rate = p.at("learning_rate").get<double>();
      m.params_.min_samples_leaf = p.at("min_samples_leaf").get<int>();
      m.params_.subsample = p.at("subsample").get<double>();
      m.params_.l2 = p.at("l2").get<double>();
      if (p.contains("class_weights")) {
        m.params_.class_weights = std::pair{p["class_weights"].at(0).get<double>(), p["class_weights"].at(1).get<double>()};
      }
      for (const auto& jt : j.at("trees")) {
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto value = jt.at("value").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
          throw ParseError("inconsistent tree arrays");
        }
        Tree t;
        for (std::size_t i = 0; i < n; ++i) {
          TreeNode node{feature[i], threshold[i], left[i], right[i], value[i]};
          if (!node.is_leaf()) {
            const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
            if (node.feature >= m.n_features_ || !in_range(node.left) || !in_range(node.right)) {
              throw ParseError("tree node " + std::to_string(i) + " has invalid links");
            }
          } else if (!std::isfinite(node.value)) {
            throw ParseError("non-finite leaf value");
          }
          t.nodes.push_back(node);
        }
        m.trees_.push_back(std::move(t));
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("gbdt model: ") + e.what());
    }
  }

  bool operator==(const GbdtModel&) const = default;

 private:
  friend GbdtModel fit_gbdt(std::span<const std::vector<double>>, std::span<const int>, const GbdtParams&,
                            std::uint64_t);

  int n_features_ = 0;
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<Tree> trees_;
  GbdtParams params_;
};

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeAccum {
  int count = 0;
  double weight = 0.0;
  double sum = 0.0;
  double last = 0.0;
};

inline double split_threshold(double lo, double hi) {
  double t = lo + (hi - lo) / 2.0;
  if (!(t < hi)) t = lo;
  return t;
}

}  // namespace detail

/// Fits a boosted ensemble. `x` holds one feature row per sample.
inline GbdtModel fit_gbdt(std::span<const std::vector<double>> x, std::span<const int> y, const GbdtParams& params,
                          std::uint64_t seed) {
  params.validate();
  const std::size_t n = x.size();
  if (n == 0) throw DomainError("cannot fit a detector on an empty dataset");
  if (y.size() != n) throw DomainError("label count differs from sample count");
  const std::size_t d = x[0].size();
  for (const auto& row : x) {
    if (row.size() != d) throw DomainError("ragged feature matrix");
  }

  std::vector<double> w(n, 1.0);
  double w_total = 0.0, w_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 0 && y[i] != 1) throw DomainError("labels must be 0 or 1");
    if (params.class_weights) w[i] = y[i] ? params.class_weights->second : params.class_weights->first;
    w_total += w[i];
    if (y[i]) w_pos += w[i];
  }

  GbdtModel model;
  model.n_features_ = static_cast<int>(d);
  model.learning_rate_ = params.learning_rate;
  model.params_ = params;
  model.base_score_ = logit(std::clamp(w_pos / w_total, kProbClamp, 1.0 - kProbClamp));
  if (w_pos == 0.0 || w_pos == w_total) return model;

  // Column-wise presort, ties kept in sample order.
  std::vector<std::vector<std::uint32_t>> order(d);
  std::vector<std::vector<double>> sorted_value(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& o = order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x[a][f] < x[b][f]; });
    sorted_value[f].resize(n);
    for (std::size_t r = 0; r < n; ++r) sorted_value[f][r] = x[o[r]][f];
  }

  std::mt19937_64 rng(seed);
  std::vector<double> margin(n, model.base_score_), grad(n), hess(n);
  std::vector<int> node_of(n);
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  const std::size_t bag_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))));

  for (int stage = 0; stage < params.n_trees; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = static_cast<double>(y[i]) - p;
      hess[i] = p * (1.0 - p);
    }
    std::fill(node_of.begin(), node_of.end(), -1);
    if (bag_size < n) {
      std::shuffle(all.begin(), all.end(), rng);
      for (std::size_t b = 0; b < bag_size; ++b) node_of[all[b]] = 0;
    } else {
      std::fill(node_of.begin(), node_of.end(), 0);
    }

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> frontier{0};
    for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
      // slot[node id] -> position in frontier
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

      std::vector<detail::NodeAccum> total(frontier.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (node_of[i] < 0) continue;
        const int s = slot[static_cast<std::size_t>(node_of[i])];
        if (s < 0) continue;
        auto& t = total[static_cast<std::size_t>(s)];
        ++t.count;
        t.weight += w[i];
        t.sum += w[i] * grad[i];
      }

      std::vector<detail::SplitCandidate> best(frontier.size());
      std::vector<detail::NodeAccum> left(frontier.size());
      for (std::size_t f = 0; f < d; ++f) {
        std::fill(left.begin(), left.end(), detail::NodeAccum{});
        const auto& of = order[f];
        const auto& vf = sorted_value[f];
        for (std::size_t r = 0; r < n; ++r) {
          const std::uint32_t i = of[r];
          if (node_of[i] < 0) continue;
          const int s = slot[static_cast<std::size_t>(node_of[i])];
          if (s < 0) continue;
          auto& l = left[static_cast<std::size_t>(s)];
          const auto& t = total[static_cast<std::size_t>(s)];
          const double v = vf[r];
          if (l.count > 0 && v > l.last) {
            const int right_count = t.count - l.count;
            if (l.count >= params.min_samples_leaf && right_count >= params.min_samples_leaf) {
              const double wr = t.weight - l.weight;
              const double sr = t.sum - l.sum;
              const double gain = l.sum * l.sum / l.weight + sr * sr / wr - t.sum * t.sum / t.weight;
              auto& b = best[static_cast<std::size_t>(s)];
              if (gain > b.gain) b = {gain, static_cast<int>(f), detail::split_threshold(l.last, v)};
            }
          }
          ++l.count;
          l.weight += w[i];
          l.sum += w[i] * grad[i];
          l.last = v;
        }
      }

      std::vector<int> next;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const auto& b = best[s];
        if (b.feature < 0) continue;
        const int id = frontier[s];
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.left = l;
        node.right = l + 1;
        next.push_back(l);
        next.push_back(l + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (node_of[i] < 0) continue;
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
        if (!node.is_leaf()) {
          node_of[i] = x[i][static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
      }
      frontier = std::move(next);
    }

    // Newton leaf values from the in-bag samples.
    std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      num[static_cast<std::size_t>(node_of[i])] += w[i] * grad[i];
      den[static_cast<std::size_t>(node_of[i])] += w[i] * hess[i];
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      TreeNode& node = tree.nodes[id];
      if (node.is_leaf()) {
        const double denom = den[id] + params.l2;
        node.value = denom > 0.0 ? num[id] / denom : 0.0;
      }
    }

    for (std::size_t i = 0; i < n; ++i) margin[i] += params.learning_rate * tree.predict(x[i]);
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

inline GbdtModel fit_gbdt(std::span<const DetectionSample> samples, const GbdtParams& params, std::uint64_t seed) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    x.push_back(s.x);
    y.push_back(s.y);
  }
  return fit_gbdt(std::span<const std::vector<double>>(x), std::span<const int>(y), params, seed);
}

}  // namespace clf
