#pragma once

// Mini-batch Adam training of the CNN-FiLM network on the MSE objective.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "clf/cnnfilm/network.hpp"

namespace clf::cnn {

struct LocalizerSample {
  std::vector<double> strain;
  double motor_pos = 0.0;
  std::vector<double> target;
};

struct TrainOptions {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean train-mode sample loss per epoch
};

inline Normalizer fit_normalizer(std::span<const LocalizerSample> data) {
  if (data.empty()) throw DomainError("cannot fit normalization on an empty dataset");
  const std::size_t n_nodes = data.front().strain.size();
  Normalizer norm;
  norm.strain_mean.assign(n_nodes, 0.0);
  norm.strain_std.assign(n_nodes, 0.0);
  double motor_sum = 0.0;
  for (const auto& s : data) {
    if (s.strain.size() != n_nodes) throw DomainError("ragged strain vectors");
    for (std::size_t i = 0; i < n_nodes; ++i) norm.strain_mean[i] += s.strain[i];
    motor_sum += s.motor_pos;
  }
  const double n = static_cast<double>(data.size());
  for (double& m : norm.strain_mean) m /= n;
  norm.motor_mean = motor_sum / n;
  double motor_ss = 0.0;
  for (const auto& s : data) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const double d = s.strain[i] - norm.strain_mean[i];
      norm.strain_std[i] += d * d;
    }
    motor_ss += (s.motor_pos - norm.motor_mean) * (s.motor_pos - norm.motor_mean);
  }
  // Constant columns keep unit scale.
  for (double& v : norm.strain_std) {
    v = std::sqrt(v / n);
    if (!(v > 1e-9)) v = 1.0;
  }
  norm.motor_std = std::sqrt(motor_ss / n);
  if (!(norm.motor_std > 1e-9)) norm.motor_std = 1.0;
  return norm;
}

template <typename T>
class Adam {
 public:
  Adam(const CnnFilmNet<T>& net, const TrainOptions& opts) : opts_(opts) {
    for (int p = 0; p < kParamCount; ++p) {
      m_[static_cast<std::size_t>(p)] = Matrix<T>::Zero(net.param(p).rows(), net.param(p).cols());
      v_[static_cast<std::size_t>(p)] = m_[static_cast<std::size_t>(p)];
    }
  }

  void step(CnnFilmNet<T>& net) {
    ++t_;
    const T b1 = static_cast<T>(opts_.beta1), b2 = static_cast<T>(opts_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(opts_.beta1, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(opts_.beta2, static_cast<double>(t_)));
    const T lr = static_cast<T>(opts_.learning_rate), eps = static_cast<T>(opts_.adam_eps);
    for (int p = 0; p < kParamCount; ++p) {
      auto& m = m_[static_cast<std::size_t>(p)];
      auto& v = v_[static_cast<std::size_t>(p)];
      const auto& g = net.grad(p);
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
      net.param(p).array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }

 private:
  TrainOptions opts_;
  long t_ = 0;
  std::array<Matrix<T>, kParamCount> m_;
  std::array<Matrix<T>, kParamCount> v_;
};

/// Gathers a batch of samples into standardized network inputs and targets.
template <typename T>
void gather_batch(const CnnFilmNet<T>& net, std::span<const LocalizerSample> data, std::span<const std::size_t> idx,
                  Matrix<T>& x, Matrix<T>& z, Matrix<T>& target) {
  const auto& norm = net.normalizer();
  const auto& arch = net.arch();
  const int batch = static_cast<int>(idx.size());
  x.resize(arch.input_len, batch);
  z.resize(arch.n_scalar, batch);
  target.resize(arch.n_out, batch);
  for (int s = 0; s < batch; ++s) {
    const LocalizerSample& smp = data[idx[static_cast<std::size_t>(s)]];
    if (static_cast<int>(smp.strain.size()) != arch.input_len || static_cast<int>(smp.target.size()) != arch.n_out) {
      throw DomainError("training sample has the wrong shape");
    }
    for (int i = 0; i < arch.input_len; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      x(i, s) = static_cast<T>((smp.strain[ui] - norm.strain_mean[ui]) / norm.strain_std[ui]);
    }
    z(0, s) = static_cast<T>((smp.motor_pos - norm.motor_mean) / norm.motor_std);
    for (int j = 0; j < arch.n_out; ++j) target(j, s) = static_cast<T>(smp.target[static_cast<std::size_t>(j)]);
  }
}

/// Fits normalization statistics on `data`, then trains in place.
/// Throws DivergenceError on a non-finite loss or parameter.
template <typename T>
TrainReport train(CnnFilmNet<T>& net, std::span<const LocalizerSample> data, const TrainOptions& opts,
                  const std::function<void(int, double)>& on_epoch = {}) {
  if (data.empty()) throw DomainError("cannot train on an empty dataset");
  if (opts.epochs < 0 || opts.batch_size < 1 || !(opts.learning_rate > 0.0)) {
    throw DomainError("invalid training options");
  }
  net.normalizer() = fit_normalizer(data);
  std::mt19937_64 rng(opts.seed);
  Adam<T> adam(net, opts);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  Matrix<T> x, z, target;
  ForwardCache<T> cache;
  const int n_out = net.arch().n_out;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      gather_batch(net, data, idx, x, z, target);
      const Matrix<T> pred = net.forward(x, z, Mode::train, cache, &rng);
      const Matrix<T> diff = pred - target;
      const double batch_sq = static_cast<double>(diff.squaredNorm());
      const double batch = static_cast<double>(idx.size());
      if (!std::isfinite(batch_sq)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      loss_sum += batch_sq / n_out;
      const Matrix<T> d_out = diff * static_cast<T>(2.0 / (n_out * batch));
      net.backward(cache, d_out);
      net.update_running_stats(cache);
      adam.step(net);
      if (!net.all_finite()) {
        throw DivergenceError("non-finite parameter after a step in epoch " + std::to_string(epoch + 1));
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.size());
    report.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  return report;
}

/// Mean eval-mode MSE over a dataset.
template <typename T>
double evaluate_loss(const CnnFilmNet<T>& net, std::span<const LocalizerSample> data, int batch_size = 256) {
  if (data.empty()) throw DomainError("empty dataset");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Matrix<T> x, z, target;
  double sum = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
    gather_batch(net, data, std::span<const std::size_t>(idx.data() + start, end - start), x, z, target);
    const Matrix<T> pred = net.forward(x, z, Mode::eval);
    sum += static_cast<double>((pred - target).squaredNorm());
  }
  return sum / (static_cast<double>(data.size()) * net.arch().n_out);
}

}  // namespace clf::cnn
