#pragma once

// Architecture description for the strain CNN with FiLM conditioning.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clf/straincore.hpp"

namespace clf::cnn {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 16;
  int kernel = 7;
  int padding = 3;
  int dilation = 2;

  bool operator==(const ConvSpec&) const = default;
};

/// Stride-1 convolution output length.
inline int conv_out_len(int len, const ConvSpec& c) { return len + 2 * c.padding - c.dilation * (c.kernel - 1); }

inline int pool_out_len(int len, int kernel, int stride) { return len < kernel ? 0 : (len - kernel) / stride + 1; }

struct CnnFilmArch {
  int input_len = 263;
  std::array<ConvSpec, 3> conv = {{{1, 16, 7, 3, 2}, {16, 32, 7, 3, 2}, {32, 64, 3, 1, 1}}};
  int pool_kernel = 2;
  int pool_stride = 2;
  double dropout = 0.1;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  int n_scalar = 1;
  int film_hidden = 128;
  std::array<int, 2> head_hidden = {128, 64};
  int n_out = 64;

  /// Position counts after conv1, pool1, conv2, pool2, conv3, pool3.
  std::vector<int> trace_lengths() const {
    std::vector<int> lens;
    int len = input_len;
    for (const ConvSpec& c : conv) {
      len = conv_out_len(len, c);
      lens.push_back(len);
      len = pool_out_len(len, pool_kernel, pool_stride);
      lens.push_back(len);
    }
    return lens;
  }

  int film_channels() const { return conv[2].out_channels; }
  int final_len() const { return trace_lengths().back(); }
  int film_dim() const { return film_channels() * final_len(); }

  void validate() const {
    if (input_len < 1 || n_out < 1 || n_scalar < 1 || film_hidden < 1 || head_hidden[0] < 1 || head_hidden[1] < 1) {
      throw DomainError("invalid CNN-FiLM dimensions");
    }
    if (conv[0].in_channels != 1) throw DomainError("first conv block must take one input channel");
    for (int b = 0; b < 3; ++b) {
      const ConvSpec& c = conv[static_cast<std::size_t>(b)];
      if (c.kernel < 1 || c.dilation < 1 || c.padding < 0 || c.out_channels < 1) {
        throw DomainError("invalid conv block " + std::to_string(b + 1));
      }
      if (b > 0 && c.in_channels != conv[static_cast<std::size_t>(b - 1)].out_channels) {
        throw DomainError("conv block " + std::to_string(b + 1) + " input channels do not chain");
      }
    }
    if (pool_kernel < 1 || pool_stride < 1) throw DomainError("invalid pooling");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout must be in [0, 1)");
    for (int len : trace_lengths()) {
      if (len < 1) throw DomainError("input too short for the conv/pool stack");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["input_len"] = input_len;
    nlohmann::json blocks = nlohmann::json::array();
    for (const ConvSpec& c : conv) {
      blocks.push_back({c.in_channels, c.out_channels, c.kernel, c.padding, c.dilation});
    }
    j["conv"] = blocks;
    j["pool"] = {pool_kernel, pool_stride};
    j["dropout"] = dropout;
    j["bn_eps"] = bn_eps;
    j["bn_momentum"] = bn_momentum;
    j["n_scalar"] = n_scalar;
    j["film_hidden"] = film_hidden;
    j["head_hidden"] = {head_hidden[0], head_hidden[1]};
    j["n_out"] = n_out;
    return j;
  }

  static CnnFilmArch from_json(const nlohmann::json& j) {
    CnnFilmArch a;
    a.input_len = j.at("input_len").get<int>();
    for (std::size_t b = 0; b < 3; ++b) {
      const auto& c = j.at("conv").at(b);
      a.conv[b] = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(), c.at(3).get<int>(), c.at(4).get<int>()};
    }
    a.pool_kernel = j.at("pool").at(0).get<int>();
    a.pool_stride = j.at("pool").at(1).get<int>();
    a.dropout = j.at("dropout").get<double>();
    a.bn_eps = j.at("bn_eps").get<double>();
    a.bn_momentum = j.at("bn_momentum").get<double>();
    a.n_scalar = j.at("n_scalar").get<int>();
    a.film_hidden = j.at("film_hidden").get<int>();
    a.head_hidden = {j.at("head_hidden").at(0).get<int>(), j.at("head_hidden").at(1).get<int>()};
    a.n_out = j.at("n_out").get<int>();
    a.validate();
    return a;
  }

  /// FNV-1a over the canonical JSON text.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : to_json().dump()) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  /// Small variant used for gradient checks.
  static CnnFilmArch reduced() {
    CnnFilmArch a;
    a.input_len = 64;
    a.conv = {{{1, 8, 7, 3, 2}, {8, 8, 7, 3, 2}, {8, 16, 3, 1, 1}}};
    a.film_hidden = 16;
    a.head_hidden = {32, 16};
    return a;
  }

  bool operator==(const CnnFilmArch&) const = default;
};

}  // namespace clf::cnn
