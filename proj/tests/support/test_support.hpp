// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lgtse/signal/waveform.hpp"

namespace lgtse::test {

// 64-bit LCG (Knuth MMIX constants). tests/oracles/stoi_oracle.py
// reproduces the same stream, so oracle signals never need to be stored.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : x_(seed) {}
  double uniform() {  // [0, 1)
    x_ = x_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(x_ >> 11) * 0x1.0p-53;
  }
  double symmetric() { return 2.0 * uniform() - 1.0; }

 private:
  std::uint64_t x_;
};

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline Waveform random_wave(std::size_t n, std::uint64_t seed, int rate = 8000,
                            double scale = 0.1) {
  return Waveform(randn(n, seed, scale), rate);
}

inline Eigen::MatrixXd random_matrix(long rows, long cols, std::uint64_t seed,
                                     double scale = 1.0) {
  const auto v = randn(static_cast<std::size_t>(rows * cols), seed, scale);
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lgtse-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Relative disagreement used by the finite-difference checks; `floor`
// keeps near-zero entries from dominating.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace lgtse::test
