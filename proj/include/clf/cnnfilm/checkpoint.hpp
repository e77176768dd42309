#pragma once

// Binary checkpoint for CnnFilmNet. Little-endian, layout documented in
// docs/format.md:
//
//   "CLFCNN01"  u32 version  u32 scalar_bytes  u64 arch_hash
//   u32 len + architecture JSON
//   u32 n_nodes, f64[n] strain_mean, f64[n] strain_std, f64 motor_mean, f64 motor_std
//   u32 tensor_count, then per tensor: u32 len + name, u32 rows, u32 cols,
//   scalar[rows*cols] column-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "clf/cnnfilm/network.hpp"

namespace clf::cnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'F', 'C', 'N', 'N', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

inline void put_string(std::ostream& os, const std::string& s) {
  put(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw ParseError("checkpoint truncated");
  return v;
}

inline std::string get_string(std::istream& is, std::uint32_t limit = 1u << 20) {
  const auto n = get<std::uint32_t>(is);
  if (n > limit) throw ParseError("checkpoint string too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw ParseError("checkpoint truncated");
  return s;
}

template <typename T>
void put_tensor(std::ostream& os, const std::string& name, const Matrix<T>& m) {
  put_string(os, name);
  put(os, static_cast<std::uint32_t>(m.rows()));
  put(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * m.size()));
}

template <typename T>
void get_tensor(std::istream& is, const std::string& expected_name, Matrix<T>& m) {
  const std::string name = get_string(is);
  if (name != expected_name) throw ParseError("checkpoint tensor '" + name + "' where '" + expected_name + "' expected");
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  if (rows != m.rows() || cols != m.cols()) throw ParseError("checkpoint tensor '" + name + "' has the wrong shape");
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * m.size()));
  if (!is) throw ParseError("checkpoint truncated");
}

inline std::vector<std::string> buffer_names() {
  std::vector<std::string> names;
  for (int b = 1; b <= 3; ++b) {
    names.push_back("bn" + std::to_string(b) + ".running_mean");
    names.push_back("bn" + std::to_string(b) + ".running_var");
  }
  return names;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const CnnFilmNet<T>& net, std::ostream& os) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put(os, kCheckpointVersion);
  detail::put(os, static_cast<std::uint32_t>(sizeof(T)));
  detail::put(os, net.arch().hash());
  detail::put_string(os, net.arch().to_json().dump());
  const Normalizer& norm = net.normalizer();
  detail::put(os, static_cast<std::uint32_t>(norm.strain_mean.size()));
  os.write(reinterpret_cast<const char*>(norm.strain_mean.data()),
           static_cast<std::streamsize>(sizeof(double) * norm.strain_mean.size()));
  os.write(reinterpret_cast<const char*>(norm.strain_std.data()),
           static_cast<std::streamsize>(sizeof(double) * norm.strain_std.size()));
  detail::put(os, norm.motor_mean);
  detail::put(os, norm.motor_std);
  const auto buffers = detail::buffer_names();
  detail::put(os, static_cast<std::uint32_t>(kParamCount + buffers.size()));
  for (int p = 0; p < kParamCount; ++p) detail::put_tensor(os, std::string(kParamNames[static_cast<std::size_t>(p)]), net.param(p));
  for (int b = 0; b < 3; ++b) {
    detail::put_tensor(os, buffers[static_cast<std::size_t>(2 * b)], net.running_mean(b));
    detail::put_tensor(os, buffers[static_cast<std::size_t>(2 * b + 1)], net.running_var(b));
  }
}

template <typename T>
void save_checkpoint(const CnnFilmNet<T>& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  save_checkpoint(net, os);
  os.flush();
  if (!os) throw IoError("write failed for '" + path + "'");
}

template <typename T>
CnnFilmNet<T> load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw ParseError("not a CNN-FiLM checkpoint");
  if (detail::get<std::uint32_t>(is) != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
  if (detail::get<std::uint32_t>(is) != sizeof(T)) throw ParseError("checkpoint scalar type differs");
  const auto hash = detail::get<std::uint64_t>(is);
  CnnFilmArch arch;
  try {
    arch = CnnFilmArch::from_json(nlohmann::json::parse(detail::get_string(is)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint architecture: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("checkpoint architecture: ") + e.what());
  }
  if (arch.hash() != hash) throw ParseError("checkpoint architecture hash mismatch");
  CnnFilmNet<T> net(arch);
  Normalizer& norm = net.normalizer();
  const auto n = detail::get<std::uint32_t>(is);
  if (static_cast<int>(n) != arch.input_len) throw ParseError("checkpoint normalization length mismatch");
  norm.strain_mean.resize(n);
  norm.strain_std.resize(n);
  is.read(reinterpret_cast<char*>(norm.strain_mean.data()), static_cast<std::streamsize>(sizeof(double) * n));
  is.read(reinterpret_cast<char*>(norm.strain_std.data()), static_cast<std::streamsize>(sizeof(double) * n));
  if (!is) throw ParseError("checkpoint truncated");
  norm.motor_mean = detail::get<double>(is);
  norm.motor_std = detail::get<double>(is);
  const auto buffers = detail::buffer_names();
  if (detail::get<std::uint32_t>(is) != kParamCount + buffers.size()) throw ParseError("checkpoint tensor count mismatch");
  for (int p = 0; p < kParamCount; ++p) detail::get_tensor(is, std::string(kParamNames[static_cast<std::size_t>(p)]), net.param(p));
  for (int b = 0; b < 3; ++b) {
    detail::get_tensor(is, buffers[static_cast<std::size_t>(2 * b)], net.running_mean(b));
    detail::get_tensor(is, buffers[static_cast<std::size_t>(2 * b + 1)], net.running_var(b));
  }
  return net;
}

template <typename T>
CnnFilmNet<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return load_checkpoint<T>(is);
}

}  // namespace clf::cnn
