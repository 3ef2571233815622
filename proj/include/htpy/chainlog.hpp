#pragma once

// Binary chain log: a header followed by one record per retained draw.
//
//   header  "HTPY" | u32 version | u8 model class | u32 dim | u32 p | u8 fixed truncation
//           | u8 kernel family | f64 kernel first | f64 kernel second
//   record  u64 iteration | f64 discount | f64 lambda | u32 K | f64[K] alpha0
//           | u32 H | f64[H] weights-or-uniforms | f64[H*dim] atoms | u32 C | f64[C] coefficients
//
// Values are written in host byte order (little-endian on supported targets).
// A truncated trailing record is ignored on read.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "mcmc.hpp"
#include "models.hpp"

namespace htpy {

inline constexpr std::array<char, 4> kChainLogMagic{'H', 'T', 'P', 'Y'};
inline constexpr std::uint32_t kChainLogVersion = 1;

struct ChainLogHeader {
  ModelClass model_class = ModelClass::uni_scale;
  std::uint32_t dim = 1;
  std::uint32_t covariate_dim = 0;
  bool fixed_truncation = false;
  ParetoTypeKernel kernel = ParetoTypeKernel::pareto(1.0);

  static ChainLogHeader from_spec(const MixtureModelSpec& spec) {
    return {spec.model_class, static_cast<std::uint32_t>(spec.dim), static_cast<std::uint32_t>(spec.covariate_dim),
            spec.truncation > 0, spec.shape_kernel};
  }
};

class ChainLogWriter {
 public:
  ChainLogWriter(const std::string& path, const ChainLogHeader& header)
      : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
    if (!out_) throw std::runtime_error("cannot open chain log '" + path + "' for writing");
    out_.write(kChainLogMagic.data(), 4);
    put<std::uint32_t>(kChainLogVersion);
    put<std::uint8_t>(static_cast<std::uint8_t>(header.model_class));
    put<std::uint32_t>(header.dim);
    put<std::uint32_t>(header.covariate_dim);
    put<std::uint8_t>(header.fixed_truncation ? 1 : 0);
    put<std::uint8_t>(static_cast<std::uint8_t>(header.kernel.family));
    put<double>(header.kernel.first);
    put<double>(header.kernel.second);
  }

  void write(const Snapshot& s) {
    const auto& fm = s.mixture;
    put<std::uint64_t>(s.iteration);
    put<double>(s.discount);
    put<double>(s.lambda);
    put_vec(s.alpha0);
    put_vec(header_.covariate_dim > 0 ? fm.uniforms : fm.weights);
    for (double a : fm.atoms) put<double>(a);
    put_vec(fm.coefficients);
    if (!out_) throw std::runtime_error("failed writing chain log");
  }

  void operator()(const Snapshot& s) { write(s); }

  void flush() { out_.flush(); }

 private:
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_vec(const std::vector<double>& v) {
    put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    if (!v.empty()) out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  }

  std::ofstream out_;
  ChainLogHeader header_;
};

struct ChainLog {
  ChainLogHeader header;
  std::vector<Snapshot> snapshots;
  bool truncated = false;
};

[[nodiscard]] inline ChainLog read_chain_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open chain log '" + path + "'");
  auto get = [&](auto& v) { return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(v))); };
  auto get_vec = [&](std::vector<double>& v, std::uint32_t count) {
    v.resize(count);
    return count == 0 || static_cast<bool>(in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8)));
  };
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kChainLogMagic) throw InputError("'" + path + "' is not a chain log");
  std::uint32_t version = 0;
  std::uint8_t cls = 0;
  std::uint8_t fixed = 0;
  std::uint8_t family = 0;
  double first = 0.0;
  double second = 0.0;
  ChainLog log;
  if (!get(version) || !get(cls) || !get(log.header.dim) || !get(log.header.covariate_dim) || !get(fixed) ||
      !get(family) || !get(first) || !get(second)) {
    throw InputError("chain log header is truncated");
  }
  if (family > static_cast<std::uint8_t>(ParetoFamily::student_t)) throw InputError("chain log has an unknown kernel");
  log.header.kernel.family = static_cast<ParetoFamily>(family);
  log.header.kernel.first = first;
  log.header.kernel.second = second;
  if (version != kChainLogVersion) throw InputError("unsupported chain log version " + std::to_string(version));
  if (cls > static_cast<std::uint8_t>(ModelClass::cond_scale)) throw InputError("chain log has an unknown model class");
  log.header.model_class = static_cast<ModelClass>(cls);
  log.header.fixed_truncation = fixed != 0;
  const std::size_t dim = log.header.dim;
  while (true) {
    Snapshot s;
    std::uint64_t iter = 0;
    if (!get(iter)) break;
    std::uint32_t count = 0;
    std::vector<double> sticks;
    auto& fm = s.mixture;
    const bool ok = get(s.discount) && get(s.lambda) && get(count) && get_vec(s.alpha0, count) && get(count) &&
                    get_vec(sticks, count) && get_vec(fm.atoms, static_cast<std::uint32_t>(count * dim)) &&
                    get(count) && get_vec(fm.coefficients, count);
    if (!ok) {
      log.truncated = true;
      break;
    }
    s.iteration = iter;
    fm.dim = dim;
    fm.lambda = s.lambda;
    fm.covariate_dim = log.header.covariate_dim;
    fm.fixed_truncation = log.header.fixed_truncation;
    if (fm.covariate_dim > 0) {
      fm.uniforms = std::move(sticks);
    } else {
      fm.weights = std::move(sticks);
    }
    log.snapshots.push_back(std::move(s));
  }
  return log;
}

}  // namespace htpy
