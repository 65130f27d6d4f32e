// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/signal/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "lgtse/common/error.hpp"

namespace lgtse::signal {

namespace {
// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

RealFft::RealFft(int n) : n_(n), plans_(std::make_shared<Plans>()) {
  require(n >= 2, ErrorKind::kConfig, "fft size must be >= 2");
  std::vector<double> real(n);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  auto* cspec = reinterpret_cast<fftw_complex*>(spec.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->r2c = fftw_plan_dft_r2c_1d(n, real.data(), cspec, flags);
  plans_->c2r = fftw_plan_dft_c2r_1d(n, cspec, real.data(),
                                     flags | FFTW_DESTROY_INPUT);
  require(plans_->r2c && plans_->c2r, ErrorKind::kConfig,
          "FFTW plan creation failed");
}

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) const {
  require(static_cast<int>(in.size()) == n_ &&
              static_cast<int>(out.size()) == bins(),
          ErrorKind::kShape, "RealFft::forward buffer size");
  // r2c does not modify its input, but the API takes a non-const pointer.
  fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) const {
  require(static_cast<int>(in.size()) == bins() &&
              static_cast<int>(out.size()) == n_,
          ErrorKind::kShape, "RealFft::inverse buffer size");
  // c2r destroys its input.
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(plans_->c2r,
                       reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
}

std::shared_ptr<const RealFft> RealFft::get(int n) {
  static std::mutex cache_mutex;
  static std::map<int, std::shared_ptr<const RealFft>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto fft = std::make_shared<const RealFft>(n);
  cache.emplace(n, fft);
  return fft;
}

}  // namespace lgtse::signal
