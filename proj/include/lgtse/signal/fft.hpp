// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <memory>
#include <span>

namespace lgtse::signal {

// Real-input FFT of a fixed size backed by FFTW. Plans are created once per
// size and shared; execute() calls are safe from concurrent threads.
class RealFft {
 public:
  explicit RealFft(int n);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / N), k = 0..N/2.
  void forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;

  // Unnormalized half-spectrum synthesis (Hermitian extension implied):
  // out[n] = sum_{k=0}^{N-1} X[k] exp(2 pi i k n / N). Imaginary parts of the
  // DC and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

  static std::shared_ptr<const RealFft> get(int n);

 private:
  struct Plans;
  int n_;
  std::shared_ptr<Plans> plans_;
};

}  // namespace lgtse::signal
