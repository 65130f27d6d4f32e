// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/signal/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgtse/common/error.hpp"
#include "lgtse/kernels/spectral.hpp"

namespace lgtse::signal {

namespace {

int samples_for_ms(double ms, int rate, const char* what) {
  const double exact = ms * rate / 1000.0;
  const double rounded = std::round(exact);
  require(rounded >= 1.0 && std::abs(exact - rounded) < 1e-9,
          ErrorKind::kConfig,
          std::string(what) + " must be a positive integer sample count");
  return static_cast<int>(rounded);
}

// Weight applied to bin k when synthesizing a real frame from a half
// spectrum: DC (and Nyquist for even N) appear once, every other bin twice.
std::vector<double> hermitian_weights(int n) {
  const int f = n / 2 + 1;
  std::vector<double> c(f, 2.0);
  c[0] = 1.0;
  if (n % 2 == 0) c[f - 1] = 1.0;
  return c;
}

// Sum of squared windows covering each output sample.
std::vector<double> window_norm(const std::vector<double>& window, int hop,
                                int frames, std::size_t len) {
  std::vector<double> norm(len, 0.0);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (std::size_t i = 0; i < window.size() && start + i < len; ++i) {
      norm[start + i] += window[i] * window[i];
    }
  }
  return norm;
}

// Samples whose window coverage is this small relative to the peak are not
// normalized (their reconstruction would amplify frame-edge content).
constexpr double kNormFloor = 1e-3;

std::vector<double> inverse_norm(const SpectroConfig& cfg, int frames,
                                 std::size_t len) {
  const auto window = analysis_window(cfg);
  auto norm = window_norm(window, cfg.hop_length(), frames, len);
  const double peak =
      norm.empty() ? 0.0 : *std::max_element(norm.begin(), norm.end());
  const double floor = kNormFloor * peak;
  for (double& v : norm) v = v > 0.0 ? 1.0 / std::max(v, floor) : 0.0;
  return norm;
}

std::size_t covered_length(const SpectroConfig& cfg, int frames) {
  if (frames <= 0) return 0;
  return static_cast<std::size_t>(frames - 1) * cfg.hop_length() +
         cfg.win_length();
}

}  // namespace

int SpectroConfig::win_length() const {
  return samples_for_ms(win_ms, sample_rate, "win_ms");
}

int SpectroConfig::hop_length() const {
  return samples_for_ms(hop_ms, sample_rate, "hop_ms");
}

int SpectroConfig::frames_for(std::size_t n) const {
  const auto win = static_cast<std::size_t>(win_length());
  if (n < win) return 0;
  return static_cast<int>((n - win) / hop_length()) + 1;
}

void SpectroConfig::validate() const {
  require(sample_rate > 0, ErrorKind::kConfig, "sample_rate must be > 0");
  const int win = win_length();
  const int hop = hop_length();
  require(hop <= win, ErrorKind::kConfig, "hop_ms must be <= win_ms");
  require(win >= 2, ErrorKind::kConfig, "window must span >= 2 samples");
  require(beta > 0.0 && beta <= 1.0, ErrorKind::kConfig,
          "beta must lie in (0, 1]");
}

std::vector<double> analysis_window(const SpectroConfig& cfg) {
  const int n = cfg.win_length();
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

Eigen::MatrixXd stft_matrix(const std::vector<double>& samples,
                            const SpectroConfig& cfg) {
  const int frames = cfg.frames_for(samples.size());
  require(frames >= 1, ErrorKind::kLength,
          "signal shorter than one analysis window");
  const auto window = analysis_window(cfg);
  const auto fft = RealFft::get(cfg.n_fft());
  return kernels::omp::analyze_frames(samples, window, *fft,
                                      cfg.hop_length(), frames);
}

std::vector<double> istft_matrix(const Eigen::MatrixXd& data,
                                 const SpectroConfig& cfg,
                                 std::size_t out_len) {
  require(data.rows() == 2 * cfg.bins(), ErrorKind::kConfig,
          "spectrogram geometry does not match config");
  const int frames = static_cast<int>(data.cols());
  const int n = cfg.n_fft();
  const auto window = analysis_window(cfg);
  const auto fft = RealFft::get(n);
  std::vector<double> scale(cfg.bins(), 1.0 / n);
  const Eigen::MatrixXd td =
      kernels::omp::synthesize_frames(data, window, *fft, scale);

  const std::size_t covered = covered_length(cfg, frames);
  std::vector<double> out(std::max(out_len, covered), 0.0);
  kernels::omp::overlap_add(td, cfg.hop_length(),
                            std::span<double>(out.data(), covered));
  const auto inv = inverse_norm(cfg, frames, covered);
  for (std::size_t i = 0; i < covered; ++i) out[i] *= inv[i];
  out.resize(out_len);
  return out;
}

std::vector<double> stft_adjoint(const Eigen::MatrixXd& grad,
                                 const SpectroConfig& cfg, std::size_t len) {
  require(grad.rows() == 2 * cfg.bins(), ErrorKind::kShape,
          "gradient geometry does not match config");
  const int n = cfg.n_fft();
  const auto window = analysis_window(cfg);
  const auto fft = RealFft::get(n);
  // The unnormalized inverse doubles interior bins; undo that.
  auto scale = hermitian_weights(n);
  for (double& c : scale) c = 1.0 / c;
  const Eigen::MatrixXd td =
      kernels::omp::synthesize_frames(grad, window, *fft, scale);
  std::vector<double> out(len, 0.0);
  const std::size_t covered =
      std::min(len, covered_length(cfg, static_cast<int>(grad.cols())));
  kernels::omp::overlap_add(td, cfg.hop_length(),
                            std::span<double>(out.data(), covered));
  return out;
}

Eigen::MatrixXd istft_adjoint(const std::vector<double>& grad,
                              const SpectroConfig& cfg, int frames) {
  const int n = cfg.n_fft();
  const int f = cfg.bins();
  const std::size_t covered = covered_length(cfg, frames);
  std::vector<double> g(covered, 0.0);
  const auto inv = inverse_norm(cfg, frames, covered);
  for (std::size_t i = 0; i < covered && i < grad.size(); ++i) {
    g[i] = grad[i] * inv[i];
  }
  const auto window = analysis_window(cfg);
  const auto fft = RealFft::get(n);
  Eigen::MatrixXd out = kernels::omp::analyze_frames(
      g, window, *fft, cfg.hop_length(), frames);
  const auto c = hermitian_weights(n);
  for (int k = 0; k < f; ++k) {
    out.row(k) *= c[k] / n;
    out.row(f + k) *= c[k] / n;
  }
  // Synthesis ignores the imaginary DC (and even-N Nyquist) components.
  out.row(f).setZero();
  if (n % 2 == 0) out.row(2 * f - 1).setZero();
  return out;
}

Eigen::MatrixXd magnitude_power(const Eigen::MatrixXd& data, double gamma) {
  const long f = data.rows() / 2;
  Eigen::MatrixXd out(data.rows(), data.cols());
  for (long t = 0; t < data.cols(); ++t) {
    for (long k = 0; k < f; ++k) {
      const double re = data(k, t);
      const double im = data(f + k, t);
      const double m = std::hypot(re, im);
      const double s = m > 0.0 ? std::pow(m, gamma - 1.0) : 0.0;
      out(k, t) = re * s;
      out(f + k, t) = im * s;
    }
  }
  return out;
}

// d/dv [m^(g-1) v] = m^(g-1) I + (g-1) m^(g-3) v v^T, which is symmetric.
Eigen::MatrixXd magnitude_power_vjp(const Eigen::MatrixXd& data, double gamma,
                                    const Eigen::MatrixXd& grad) {
  const long f = data.rows() / 2;
  Eigen::MatrixXd out(data.rows(), data.cols());
  for (long t = 0; t < data.cols(); ++t) {
    for (long k = 0; k < f; ++k) {
      const double re = data(k, t);
      const double im = data(f + k, t);
      const double m = std::hypot(re, im);
      if (m == 0.0) {
        out(k, t) = 0.0;
        out(f + k, t) = 0.0;
        continue;
      }
      const double gr = grad(k, t);
      const double gi = grad(f + k, t);
      const double a = std::pow(m, gamma - 1.0);
      const double b = (gamma - 1.0) * a / (m * m) * (re * gr + im * gi);
      out(k, t) = a * gr + b * re;
      out(f + k, t) = a * gi + b * im;
    }
  }
  return out;
}

ComplexSpectrogram stft(const Waveform& w, const SpectroConfig& cfg) {
  cfg.validate();
  require(w.sample_rate == cfg.sample_rate, ErrorKind::kConfig,
          "waveform sample rate does not match SpectroConfig");
  return ComplexSpectrogram{stft_matrix(w.samples, cfg), cfg.bins(), cfg};
}

Waveform istft(const ComplexSpectrogram& spec, const SpectroConfig& cfg,
               std::size_t out_len) {
  cfg.validate();
  require(spec.bins == cfg.bins(), ErrorKind::kConfig,
          "spectrogram bins do not match config");
  return Waveform(istft_matrix(spec.data, cfg, out_len), cfg.sample_rate);
}

ComplexSpectrogram drc_compress(const ComplexSpectrogram& spec, double beta) {
  require(beta > 0.0 && beta <= 1.0, ErrorKind::kConfig,
          "beta must lie in (0, 1]");
  return ComplexSpectrogram{magnitude_power(spec.data, beta), spec.bins,
                            spec.config};
}

ComplexSpectrogram drc_expand(const ComplexSpectrogram& spec, double beta) {
  require(beta > 0.0 && beta <= 1.0, ErrorKind::kConfig,
          "beta must lie in (0, 1]");
  return ComplexSpectrogram{magnitude_power(spec.data, 1.0 / beta), spec.bins,
                            spec.config};
}

}  // namespace lgtse::signal
