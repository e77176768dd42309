#pragma once

// CNN-FiLM force-distribution network with hand-written reverse mode.
//
// Layout: an activation with C channels and L positions for a batch of B
// samples is a C x (B*L) matrix whose column b*L + p holds position p of
// sample b. Conv weights are C_out x (C_in*K) with column ci*K + k.
//
//   strain -> [conv -> batchnorm -> relu -> maxpool -> dropout] x 3
//          -> FiLM(gamma, beta from motor position) -> flatten
//          -> linear -> relu -> linear -> relu -> linear -> tau

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "clf/cnnfilm/arch.hpp"
#include "clf/straincore.hpp"

namespace clf::cnn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

enum class Mode { train, eval };

enum ParamId : int {
  kConv1W, kBn1Gamma, kBn1Beta,
  kConv2W, kBn2Gamma, kBn2Beta,
  kConv3W, kBn3Gamma, kBn3Beta,
  kFilm1W, kFilm1B, kFilm2W, kFilm2B,
  kFc1W, kFc1B, kFc2W, kFc2B, kFc3W, kFc3B,
  kParamCount
};

inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "conv1.weight", "bn1.gamma",    "bn1.beta",    "conv2.weight", "bn2.gamma",  "bn2.beta",   "conv3.weight",
    "bn3.gamma",    "bn3.beta",     "film1.weight", "film1.bias",  "film2.weight", "film2.bias", "fc1.weight",
    "fc1.bias",     "fc2.weight",   "fc2.bias",    "fc3.weight",   "fc3.bias"};

/// Per-node strain and motor standardization from training statistics.
struct Normalizer {
  std::vector<double> strain_mean;
  std::vector<double> strain_std;
  double motor_mean = 0.0;
  double motor_std = 1.0;

  bool operator==(const Normalizer&) const = default;
};

template <typename T>
struct BlockCache {
  int len_in = 0, len_conv = 0, len_pool = 0;
  Matrix<T> col;       // im2col of the block input
  Matrix<T> conv;      // raw conv output
  Matrix<T> xhat;      // normalized conv output
  Matrix<T> invstd;    // C x 1
  Matrix<T> mean;      // batch statistics, C x 1
  Matrix<T> var;
  Matrix<T> relu;      // post-activation, pre-pool
  std::vector<int> pool_src;  // source column per pooled element, C x (B*Lp) column-major
  Matrix<T> drop_mask;        // empty when dropout inactive
};

template <typename T>
struct ForwardCache {
  int batch = 0;
  bool film_applied = true;
  std::array<BlockCache<T>, 3> blocks;
  Matrix<T> film_in;     // n_scalar x B
  Matrix<T> film_hpre;   // hidden pre-activation
  Matrix<T> film_h;
  Matrix<T> gamma, beta; // C x B
  Matrix<T> features;    // conv-3 output before FiLM, C x (B*P)
  Matrix<T> flat;        // (C*P) x B after FiLM
  Matrix<T> a1, r1, a2, r2;
};

template <typename T>
class CnnFilmNet {
 public:
  explicit CnnFilmNet(const CnnFilmArch& arch = {}, std::uint64_t seed = 0) : arch_(arch) {
    arch_.validate();
    std::mt19937_64 rng(seed);
    auto uniform = [&](Matrix<T>& m, int rows, int cols, double bound) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      m.resize(rows, cols);
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<T>(dist(rng));
    };
    for (int b = 0; b < 3; ++b) {
      const ConvSpec& c = arch_.conv[static_cast<std::size_t>(b)];
      const int fan_in = c.in_channels * c.kernel;
      uniform(params_[conv_w(b)], c.out_channels, fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)));
      params_[bn_gamma(b)] = Matrix<T>::Ones(c.out_channels, 1);
      params_[bn_beta(b)] = Matrix<T>::Zero(c.out_channels, 1);
      running_mean_[static_cast<std::size_t>(b)] = Matrix<T>::Zero(c.out_channels, 1);
      running_var_[static_cast<std::size_t>(b)] = Matrix<T>::Ones(c.out_channels, 1);
    }
    auto linear = [&](ParamId w, ParamId bias, int out, int in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      uniform(params_[w], out, in, bound);
      uniform(params_[bias], out, 1, bound);
    };
    const int ch = arch_.film_channels();
    linear(kFilm1W, kFilm1B, arch_.film_hidden, arch_.n_scalar);
    // Generator starts at gamma = 1, beta = 0: the unmodulated network.
    params_[kFilm2W] = Matrix<T>::Zero(2 * ch, arch_.film_hidden);
    params_[kFilm2B] = Matrix<T>::Zero(2 * ch, 1);
    params_[kFilm2B].topRows(ch).setOnes();
    linear(kFc1W, kFc1B, arch_.head_hidden[0], arch_.film_dim());
    linear(kFc2W, kFc2B, arch_.head_hidden[1], arch_.head_hidden[0]);
    linear(kFc3W, kFc3B, arch_.n_out, arch_.head_hidden[1]);
    for (int p = 0; p < kParamCount; ++p) grads_[static_cast<std::size_t>(p)] = Matrix<T>::Zero(params_[p].rows(), params_[p].cols());
    norm_.strain_mean.assign(static_cast<std::size_t>(arch_.input_len), 0.0);
    norm_.strain_std.assign(static_cast<std::size_t>(arch_.input_len), 1.0);
  }

  const CnnFilmArch& arch() const { return arch_; }

  Matrix<T>& param(int id) { return params_[static_cast<std::size_t>(id)]; }
  const Matrix<T>& param(int id) const { return params_[static_cast<std::size_t>(id)]; }
  Matrix<T>& grad(int id) { return grads_[static_cast<std::size_t>(id)]; }
  const Matrix<T>& grad(int id) const { return grads_[static_cast<std::size_t>(id)]; }
  Matrix<T>& running_mean(int block) { return running_mean_[static_cast<std::size_t>(block)]; }
  Matrix<T>& running_var(int block) { return running_var_[static_cast<std::size_t>(block)]; }
  const Matrix<T>& running_mean(int block) const { return running_mean_[static_cast<std::size_t>(block)]; }
  const Matrix<T>& running_var(int block) const { return running_var_[static_cast<std::size_t>(block)]; }

  Normalizer& normalizer() { return norm_; }
  const Normalizer& normalizer() const { return norm_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p.allFinite()) return false;
    }
    return true;
  }

  /// Forward pass on standardized inputs: `x` is input_len x B, `z` is
  /// n_scalar x B. Returns n_out x B. Train mode uses batch statistics and
  /// draws dropout masks from `rng` (required when dropout > 0).
  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& z, Mode mode, ForwardCache<T>& cache,
                    std::mt19937_64* rng = nullptr, bool apply_film = true) const {
    if (x.rows() != arch_.input_len) {
      throw DomainError("strain input has " + std::to_string(x.rows()) + " nodes, expected " +
                        std::to_string(arch_.input_len));
    }
    if (z.rows() != arch_.n_scalar || z.cols() != x.cols()) throw DomainError("conditioning input shape mismatch");
    const int batch = static_cast<int>(x.cols());
    cache.batch = batch;
    cache.film_applied = apply_film;

    // Channel-major activation: one input channel, so a reshape.
    Matrix<T> act = Eigen::Map<const Matrix<T>>(x.data(), 1, static_cast<Eigen::Index>(batch) * arch_.input_len);
    int len = arch_.input_len;
    for (int b = 0; b < 3; ++b) {
      act = block_forward(b, act, batch, len, mode, cache.blocks[static_cast<std::size_t>(b)], rng);
      len = cache.blocks[static_cast<std::size_t>(b)].len_pool;
    }
    const int ch = arch_.film_channels();
    const int positions = len;
    cache.features = std::move(act);

    // FiLM generator.
    cache.film_in = z;
    cache.film_hpre = (param(kFilm1W) * z).colwise() + param(kFilm1B).col(0);
    cache.film_h = cache.film_hpre.cwiseMax(T(0));
    Matrix<T> gb = (param(kFilm2W) * cache.film_h).colwise() + param(kFilm2B).col(0);
    cache.gamma = gb.topRows(ch);
    cache.beta = gb.bottomRows(ch);

    cache.flat.resize(static_cast<Eigen::Index>(ch) * positions, batch);
    for (int s = 0; s < batch; ++s) {
      for (int c = 0; c < ch; ++c) {
        const T g = apply_film ? cache.gamma(c, s) : T(1);
        const T be = apply_film ? cache.beta(c, s) : T(0);
        for (int p = 0; p < positions; ++p) {
          cache.flat(static_cast<Eigen::Index>(c) * positions + p, s) =
              g * cache.features(c, static_cast<Eigen::Index>(s) * positions + p) + be;
        }
      }
    }

    cache.a1 = (param(kFc1W) * cache.flat).colwise() + param(kFc1B).col(0);
    cache.r1 = cache.a1.cwiseMax(T(0));
    cache.a2 = (param(kFc2W) * cache.r1).colwise() + param(kFc2B).col(0);
    cache.r2 = cache.a2.cwiseMax(T(0));
    return (param(kFc3W) * cache.r2).colwise() + param(kFc3B).col(0);
  }

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& z, Mode mode, std::mt19937_64* rng = nullptr,
                    bool apply_film = true) const {
    ForwardCache<T> cache;
    return forward(x, z, mode, cache, rng, apply_film);
  }

  /// Reverse pass for a train-mode forward. Overwrites all gradients.
  void backward(const ForwardCache<T>& cache, const Matrix<T>& d_out) {
    const int batch = cache.batch;
    const int ch = arch_.film_channels();
    const int positions = cache.blocks[2].len_pool;

    grad(kFc3W).noalias() = d_out * cache.r2.transpose();
    grad(kFc3B) = d_out.rowwise().sum();
    Matrix<T> d = param(kFc3W).transpose() * d_out;
    d = d.cwiseProduct(relu_mask(cache.a2));
    grad(kFc2W).noalias() = d * cache.r1.transpose();
    grad(kFc2B) = d.rowwise().sum();
    Matrix<T> d1 = param(kFc2W).transpose() * d;
    d1 = d1.cwiseProduct(relu_mask(cache.a1));
    grad(kFc1W).noalias() = d1 * cache.flat.transpose();
    grad(kFc1B) = d1.rowwise().sum();
    const Matrix<T> d_flat = param(kFc1W).transpose() * d1;

    // FiLM: flat = gamma * features + beta.
    Matrix<T> d_feat(ch, static_cast<Eigen::Index>(batch) * positions);
    Matrix<T> d_gb = Matrix<T>::Zero(2 * ch, batch);
    for (int s = 0; s < batch; ++s) {
      for (int c = 0; c < ch; ++c) {
        const T g = cache.film_applied ? cache.gamma(c, s) : T(1);
        T dg = 0, db = 0;
        for (int p = 0; p < positions; ++p) {
          const Eigen::Index col = static_cast<Eigen::Index>(s) * positions + p;
          const T df = d_flat(static_cast<Eigen::Index>(c) * positions + p, s);
          d_feat(c, col) = g * df;
          dg += df * cache.features(c, col);
          db += df;
        }
        if (cache.film_applied) {
          d_gb(c, s) = dg;
          d_gb(ch + c, s) = db;
        }
      }
    }
    grad(kFilm2W).noalias() = d_gb * cache.film_h.transpose();
    grad(kFilm2B) = d_gb.rowwise().sum();
    Matrix<T> d_h = param(kFilm2W).transpose() * d_gb;
    d_h = d_h.cwiseProduct(relu_mask(cache.film_hpre));
    grad(kFilm1W).noalias() = d_h * cache.film_in.transpose();
    grad(kFilm1B) = d_h.rowwise().sum();

    Matrix<T> d_act = std::move(d_feat);
    for (int b = 2; b >= 0; --b) {
      d_act = block_backward(b, d_act, batch, cache.blocks[static_cast<std::size_t>(b)], b > 0);
    }
  }

  /// Folds the batch statistics of a train-mode forward into the running estimates.
  void update_running_stats(const ForwardCache<T>& cache) {
    const T m = static_cast<T>(arch_.bn_momentum);
    for (int b = 0; b < 3; ++b) {
      const auto& bc = cache.blocks[static_cast<std::size_t>(b)];
      const double n = static_cast<double>(cache.batch) * bc.len_conv;
      const T unbias = static_cast<T>(n > 1.0 ? n / (n - 1.0) : 1.0);
      running_mean(b) = (T(1) - m) * running_mean(b) + m * bc.mean;
      running_var(b) = (T(1) - m) * running_var(b) + m * unbias * bc.var;
    }
  }

  /// Standardizes raw strain/motor columns into network inputs.
  void standardize(std::span<const std::vector<double>> strains, std::span<const double> motors, Matrix<T>& x,
                   Matrix<T>& z) const {
    const int batch = static_cast<int>(strains.size());
    x.resize(arch_.input_len, batch);
    z.resize(arch_.n_scalar, batch);
    for (int s = 0; s < batch; ++s) {
      const auto& e = strains[static_cast<std::size_t>(s)];
      if (static_cast<int>(e.size()) != arch_.input_len) {
        throw DomainError("strain vector has " + std::to_string(e.size()) + " nodes, expected " +
                          std::to_string(arch_.input_len));
      }
      for (int i = 0; i < arch_.input_len; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        x(i, s) = static_cast<T>((e[ui] - norm_.strain_mean[ui]) / norm_.strain_std[ui]);
      }
      z(0, s) = static_cast<T>((motors[static_cast<std::size_t>(s)] - norm_.motor_mean) / norm_.motor_std);
    }
  }

  /// Eval-mode prediction for raw inputs.
  std::vector<std::vector<double>> predict(std::span<const std::vector<double>> strains,
                                           std::span<const double> motors) const {
    Matrix<T> x, z;
    standardize(strains, motors, x, z);
    const Matrix<T> out = forward(x, z, Mode::eval);
    std::vector<std::vector<double>> result(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index s = 0; s < out.cols(); ++s) {
      auto& r = result[static_cast<std::size_t>(s)];
      r.resize(static_cast<std::size_t>(out.rows()));
      for (Eigen::Index j = 0; j < out.rows(); ++j) r[static_cast<std::size_t>(j)] = static_cast<double>(out(j, s));
    }
    return result;
  }

  std::vector<double> predict(std::span<const double> strain, double motor) const {
    const std::vector<std::vector<double>> one{std::vector<double>(strain.begin(), strain.end())};
    const double m[1] = {motor};
    return predict(one, m).front();
  }

 private:
  static int conv_w(int b) { return kConv1W + 3 * b; }
  static int bn_gamma(int b) { return kBn1Gamma + 3 * b; }
  static int bn_beta(int b) { return kBn1Beta + 3 * b; }

  static Matrix<T> relu_mask(const Matrix<T>& pre) {
    return (pre.array() > T(0)).template cast<T>().matrix();
  }

  Matrix<T> block_forward(int b, const Matrix<T>& in, int batch, int len_in, Mode mode, BlockCache<T>& bc,
                          std::mt19937_64* rng) const {
    const ConvSpec& spec = arch_.conv[static_cast<std::size_t>(b)];
    const int k = spec.kernel;
    const int cin = spec.in_channels;
    const int len_conv = conv_out_len(len_in, spec);
    const int len_pool = pool_out_len(len_conv, arch_.pool_kernel, arch_.pool_stride);
    bc.len_in = len_in;
    bc.len_conv = len_conv;
    bc.len_pool = len_pool;

    bc.col.resize(static_cast<Eigen::Index>(cin) * k, static_cast<Eigen::Index>(batch) * len_conv);
    for (int s = 0; s < batch; ++s) {
      for (int p = 0; p < len_conv; ++p) {
        T* dst = bc.col.data() + (static_cast<Eigen::Index>(s) * len_conv + p) * bc.col.rows();
        for (int kk = 0; kk < k; ++kk) {
          const int src = p + kk * spec.dilation - spec.padding;
          if (src < 0 || src >= len_in) {
            for (int ci = 0; ci < cin; ++ci) dst[ci * k + kk] = T(0);
            continue;
          }
          const T* from = in.data() + (static_cast<Eigen::Index>(s) * len_in + src) * cin;
          for (int ci = 0; ci < cin; ++ci) dst[ci * k + kk] = from[ci];
        }
      }
    }
    const int cout = spec.out_channels;
    bc.conv.noalias() = param(conv_w(b)) * bc.col;
    const Eigen::Index n = bc.conv.cols();
    std::vector<T> scale(static_cast<std::size_t>(cout)), shift(static_cast<std::size_t>(cout));
    if (mode == Mode::train) {
      std::vector<double> sum(static_cast<std::size_t>(cout), 0.0), sq(static_cast<std::size_t>(cout), 0.0);
      for (Eigen::Index col = 0; col < n; ++col) {
        const T* y = bc.conv.data() + col * cout;
        for (int c = 0; c < cout; ++c) sum[static_cast<std::size_t>(c)] += static_cast<double>(y[c]);
      }
      for (double& v : sum) v /= static_cast<double>(n);
      for (Eigen::Index col = 0; col < n; ++col) {
        const T* y = bc.conv.data() + col * cout;
        for (int c = 0; c < cout; ++c) {
          const double d = static_cast<double>(y[c]) - sum[static_cast<std::size_t>(c)];
          sq[static_cast<std::size_t>(c)] += d * d;
        }
      }
      bc.mean.resize(cout, 1);
      bc.var.resize(cout, 1);
      bc.invstd.resize(cout, 1);
      for (int c = 0; c < cout; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        const double var = sq[uc] / static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + arch_.bn_eps);
        bc.mean(c, 0) = static_cast<T>(sum[uc]);
        bc.var(c, 0) = static_cast<T>(var);
        bc.invstd(c, 0) = static_cast<T>(inv);
        scale[uc] = static_cast<T>(inv);
        shift[uc] = static_cast<T>(-sum[uc] * inv);
      }
    } else {
      for (int c = 0; c < cout; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        const T inv = T(1) / std::sqrt(running_var(b)(c, 0) + static_cast<T>(arch_.bn_eps));
        scale[uc] = inv;
        shift[uc] = -running_mean(b)(c, 0) * inv;
      }
    }
    bc.xhat.resize(cout, n);
    bc.relu.resize(cout, n);
    const T* gamma = param(bn_gamma(b)).data();
    const T* beta = param(bn_beta(b)).data();
    for (Eigen::Index col = 0; col < n; ++col) {
      const T* y = bc.conv.data() + col * cout;
      T* xh = bc.xhat.data() + col * cout;
      T* r = bc.relu.data() + col * cout;
      for (int c = 0; c < cout; ++c) {
        const T v = y[c] * scale[static_cast<std::size_t>(c)] + shift[static_cast<std::size_t>(c)];
        xh[c] = v;
        r[c] = std::max(T(0), gamma[c] * v + beta[c]);
      }
    }

    Matrix<T> pooled(cout, static_cast<Eigen::Index>(batch) * len_pool);
    bc.pool_src.resize(static_cast<std::size_t>(pooled.size()));
    for (int s = 0; s < batch; ++s) {
      for (int p = 0; p < len_pool; ++p) {
        const Eigen::Index out_col = static_cast<Eigen::Index>(s) * len_pool + p;
        const Eigen::Index first = static_cast<Eigen::Index>(s) * len_conv + static_cast<Eigen::Index>(p) * arch_.pool_stride;
        for (int c = 0; c < cout; ++c) {
          Eigen::Index best = first;
          T v = bc.relu(c, first);
          for (int q = 1; q < arch_.pool_kernel; ++q) {
            if (bc.relu(c, first + q) > v) {
              v = bc.relu(c, first + q);
              best = first + q;
            }
          }
          pooled(c, out_col) = v;
          bc.pool_src[static_cast<std::size_t>(out_col * cout + c)] = static_cast<int>(best);
        }
      }
    }

    if (mode == Mode::train && arch_.dropout > 0.0) {
      if (!rng) throw DomainError("train-mode dropout needs a random generator");
      // Four 16-bit uniforms per engine draw; keep probability is quantized to 1/65536.
      const auto keep_below = static_cast<std::uint32_t>(std::lround((1.0 - arch_.dropout) * 65536.0));
      const T scale = static_cast<T>(1.0 / (1.0 - arch_.dropout));
      bc.drop_mask.resize(pooled.rows(), pooled.cols());
      T* mask = bc.drop_mask.data();
      const Eigen::Index total = bc.drop_mask.size();
      for (Eigen::Index i = 0; i < total; i += 4) {
        std::uint64_t bits = (*rng)();
        for (Eigen::Index j = i; j < std::min(total, i + 4); ++j, bits >>= 16) {
          mask[j] = static_cast<std::uint32_t>(bits & 0xffffu) < keep_below ? scale : T(0);
        }
      }
      pooled.array() *= bc.drop_mask.array();
    } else {
      bc.drop_mask.resize(0, 0);
    }
    return pooled;
  }

  Matrix<T> block_backward(int b, const Matrix<T>& d_out, int batch, const BlockCache<T>& bc, bool need_input_grad) {
    const ConvSpec& spec = arch_.conv[static_cast<std::size_t>(b)];
    const int cout = spec.out_channels;
    Matrix<T>& d_y = ws_dy_[static_cast<std::size_t>(b)];
    d_y.setZero(cout, static_cast<Eigen::Index>(batch) * bc.len_conv);

    // Unpool, undo dropout and the rectifier in one scatter.
    const bool drop = bc.drop_mask.size() > 0;
    for (Eigen::Index col = 0; col < d_out.cols(); ++col) {
      for (int c = 0; c < cout; ++c) {
        const int src = bc.pool_src[static_cast<std::size_t>(col * cout + c)];
        if (!(bc.relu(c, src) > T(0))) continue;
        d_y(c, src) += drop ? d_out(c, col) * bc.drop_mask(c, col) : d_out(c, col);
      }
    }

    // Batch-norm backward with batch statistics:
    // dy = gamma * invstd * (d - mean(d) - xhat * mean(d * xhat)).
    const Eigen::Index n = d_y.cols();
    std::vector<double> sd(static_cast<std::size_t>(cout), 0.0), sdx(static_cast<std::size_t>(cout), 0.0);
    for (Eigen::Index col = 0; col < n; ++col) {
      const T* d = d_y.data() + col * cout;
      const T* xh = bc.xhat.data() + col * cout;
      for (int c = 0; c < cout; ++c) {
        sd[static_cast<std::size_t>(c)] += static_cast<double>(d[c]);
        sdx[static_cast<std::size_t>(c)] += static_cast<double>(d[c]) * static_cast<double>(xh[c]);
      }
    }
    std::vector<T> a(static_cast<std::size_t>(cout)), m1(static_cast<std::size_t>(cout)), m2(static_cast<std::size_t>(cout));
    grad(bn_beta(b)).resize(cout, 1);
    grad(bn_gamma(b)).resize(cout, 1);
    for (int c = 0; c < cout; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      grad(bn_beta(b))(c, 0) = static_cast<T>(sd[uc]);
      grad(bn_gamma(b))(c, 0) = static_cast<T>(sdx[uc]);
      a[uc] = param(bn_gamma(b))(c, 0) * bc.invstd(c, 0);
      m1[uc] = static_cast<T>(sd[uc] / static_cast<double>(n));
      m2[uc] = static_cast<T>(sdx[uc] / static_cast<double>(n));
    }
    for (Eigen::Index col = 0; col < n; ++col) {
      T* d = d_y.data() + col * cout;
      const T* xh = bc.xhat.data() + col * cout;
      for (int c = 0; c < cout; ++c) d[c] = a[static_cast<std::size_t>(c)] * (d[c] - m1[static_cast<std::size_t>(c)] - xh[c] * m2[static_cast<std::size_t>(c)]);
    }

    grad(conv_w(b)).noalias() = d_y * bc.col.transpose();
    if (!need_input_grad) return {};

    Matrix<T>& d_col = ws_dcol_[static_cast<std::size_t>(b)];
    d_col.noalias() = param(conv_w(b)).transpose() * d_y;
    const int k = spec.kernel;
    Matrix<T> d_in = Matrix<T>::Zero(spec.in_channels, static_cast<Eigen::Index>(batch) * bc.len_in);
    for (int s = 0; s < batch; ++s) {
      for (int p = 0; p < bc.len_conv; ++p) {
        const Eigen::Index col = static_cast<Eigen::Index>(s) * bc.len_conv + p;
        for (int kk = 0; kk < k; ++kk) {
          const int src = p + kk * spec.dilation - spec.padding;
          if (src < 0 || src >= bc.len_in) continue;
          const Eigen::Index src_col = static_cast<Eigen::Index>(s) * bc.len_in + src;
          for (int ci = 0; ci < spec.in_channels; ++ci) d_in(ci, src_col) += d_col(ci * k + kk, col);
        }
      }
    }
    return d_in;
  }

  CnnFilmArch arch_;
  std::array<Matrix<T>, kParamCount> params_;
  std::array<Matrix<T>, kParamCount> grads_;
  std::array<Matrix<T>, 3> running_mean_;
  std::array<Matrix<T>, 3> running_var_;
  std::array<Matrix<T>, 3> ws_dy_;    // backward scratch, reused across batches
  std::array<Matrix<T>, 3> ws_dcol_;
  Normalizer norm_;
};

/// FiLM on one C x P feature map: out[c][p] = gamma[c] * x[c][p] + beta[c].
template <typename T>
Matrix<T> film(const Matrix<T>& x, const Eigen::Matrix<T, Eigen::Dynamic, 1>& gamma,
               const Eigen::Matrix<T, Eigen::Dynamic, 1>& beta) {
  if (gamma.size() != x.rows() || beta.size() != x.rows()) {
    throw DomainError("FiLM: gamma/beta length must equal the channel count");
  }
  return (gamma.asDiagonal() * x).colwise() + beta;
}

}  // namespace clf::cnn
