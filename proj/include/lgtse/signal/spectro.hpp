// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lgtse/signal/waveform.hpp"

namespace lgtse::signal {

enum class WindowType { kHann };

struct SpectroConfig {
  int sample_rate = 8000;
  double win_ms = 32.0;
  double hop_ms = 8.0;
  WindowType window = WindowType::kHann;
  double beta = 0.5;  // magnitude compression exponent

  int win_length() const;
  int hop_length() const;
  int n_fft() const { return win_length(); }
  int bins() const { return n_fft() / 2 + 1; }
  // Frames produced for a signal of `n` samples (no padding, partial tail
  // frame dropped). Zero when n < win_length().
  int frames_for(std::size_t n) const;

  void validate() const;
  bool operator==(const SpectroConfig&) const = default;
};

// Periodic Hann taper of the configured length.
std::vector<double> analysis_window(const SpectroConfig& cfg);

// [2F x T] real tensor: rows [0, F) hold real parts, rows [F, 2F) imaginary
// parts; one column per frame.
struct ComplexSpectrogram {
  Eigen::MatrixXd data;
  int bins = 0;
  SpectroConfig config;

  int frames() const { return static_cast<int>(data.cols()); }
  auto real() const { return data.topRows(bins); }
  auto imag() const { return data.bottomRows(bins); }
};

ComplexSpectrogram stft(const Waveform& w, const SpectroConfig& cfg);

// Weighted overlap-add synthesis; output truncated or zero-padded to out_len.
Waveform istft(const ComplexSpectrogram& spec, const SpectroConfig& cfg,
               std::size_t out_len);

ComplexSpectrogram drc_compress(const ComplexSpectrogram& spec, double beta);
ComplexSpectrogram drc_expand(const ComplexSpectrogram& spec, double beta);

// Matrix-level forms used by the autodiff graph. `data` is [2F x T].
Eigen::MatrixXd stft_matrix(const std::vector<double>& samples,
                            const SpectroConfig& cfg);
std::vector<double> istft_matrix(const Eigen::MatrixXd& data,
                                 const SpectroConfig& cfg, std::size_t out_len);
// Adjoints of the two linear maps above.
std::vector<double> stft_adjoint(const Eigen::MatrixXd& grad,
                                 const SpectroConfig& cfg, std::size_t len);
Eigen::MatrixXd istft_adjoint(const std::vector<double>& grad,
                              const SpectroConfig& cfg, int frames);

// Per-bin magnitude power law m -> m^gamma with phase kept; zero bins stay
// zero. compress uses gamma = beta, expand uses gamma = 1 / beta.
Eigen::MatrixXd magnitude_power(const Eigen::MatrixXd& data, double gamma);
// Vector-Jacobian product of magnitude_power at `data`.
Eigen::MatrixXd magnitude_power_vjp(const Eigen::MatrixXd& data, double gamma,
                                    const Eigen::MatrixXd& grad);

}  // namespace lgtse::signal
