// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/kernels/spectral.hpp"

#include <algorithm>
#include <complex>

#include "lgtse/common/error.hpp"

namespace lgtse::kernels {

namespace {

void check_analysis(std::span<const double> x, std::span<const double> window,
                    const signal::RealFft& fft, int hop, int frames) {
  require(static_cast<int>(window.size()) == fft.size(), ErrorKind::kShape,
          "window length must equal fft size");
  require(hop > 0 && frames >= 0, ErrorKind::kConfig, "bad frame geometry");
  if (frames > 0) {
    const std::size_t need =
        static_cast<std::size_t>(frames - 1) * hop + window.size();
    require(x.size() >= need, ErrorKind::kLength,
            "signal shorter than frame geometry");
  }
}

void analyze_one(std::span<const double> x, std::span<const double> window,
                 const signal::RealFft& fft, int hop, int t,
                 std::vector<double>& buf,
                 std::vector<std::complex<double>>& spec,
                 Eigen::MatrixXd& out) {
  const int n = fft.size();
  const int f = fft.bins();
  const std::size_t start = static_cast<std::size_t>(t) * hop;
  for (int i = 0; i < n; ++i) buf[i] = window[i] * x[start + i];
  fft.forward(buf, spec);
  for (int k = 0; k < f; ++k) {
    out(k, t) = spec[k].real();
    out(f + k, t) = spec[k].imag();
  }
}

void synthesize_one(const Eigen::MatrixXd& spec_in,
                    std::span<const double> window, const signal::RealFft& fft,
                    std::span<const double> bin_scale, int t,
                    std::vector<std::complex<double>>& spec,
                    std::vector<double>& buf, Eigen::MatrixXd& out) {
  const int n = fft.size();
  const int f = fft.bins();
  for (int k = 0; k < f; ++k) {
    spec[k] = std::complex<double>(spec_in(k, t), spec_in(f + k, t)) *
              bin_scale[k];
  }
  fft.inverse(spec, buf);
  for (int i = 0; i < n; ++i) out(i, t) = window[i] * buf[i];
}

void check_synthesis(const Eigen::MatrixXd& spec,
                     std::span<const double> window,
                     const signal::RealFft& fft,
                     std::span<const double> bin_scale) {
  require(spec.rows() == 2 * fft.bins(), ErrorKind::kShape,
          "spectrum rows must equal 2F");
  require(static_cast<int>(window.size()) == fft.size() &&
              static_cast<int>(bin_scale.size()) == fft.bins(),
          ErrorKind::kShape, "window/bin scale size");
}

}  // namespace

namespace serial {

Eigen::MatrixXd analyze_frames(std::span<const double> x,
                               std::span<const double> window,
                               const signal::RealFft& fft, int hop,
                               int frames) {
  check_analysis(x, window, fft, hop, frames);
  Eigen::MatrixXd out(2 * fft.bins(), frames);
  std::vector<double> buf(fft.size());
  std::vector<std::complex<double>> spec(fft.bins());
  for (int t = 0; t < frames; ++t) {
    analyze_one(x, window, fft, hop, t, buf, spec, out);
  }
  return out;
}

Eigen::MatrixXd synthesize_frames(const Eigen::MatrixXd& spec_in,
                                  std::span<const double> window,
                                  const signal::RealFft& fft,
                                  std::span<const double> bin_scale) {
  check_synthesis(spec_in, window, fft, bin_scale);
  const int frames = static_cast<int>(spec_in.cols());
  Eigen::MatrixXd out(fft.size(), frames);
  std::vector<double> buf(fft.size());
  std::vector<std::complex<double>> spec(fft.bins());
  for (int t = 0; t < frames; ++t) {
    synthesize_one(spec_in, window, fft, bin_scale, t, spec, buf, out);
  }
  return out;
}

void overlap_add(const Eigen::MatrixXd& frames, int hop,
                 std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const int n = static_cast<int>(frames.rows());
  for (int t = 0; t < frames.cols(); ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < n && start + i < out.size(); ++i) {
      out[start + i] += frames(i, t);
    }
  }
}

}  // namespace serial

namespace omp {

Eigen::MatrixXd analyze_frames(std::span<const double> x,
                               std::span<const double> window,
                               const signal::RealFft& fft, int hop,
                               int frames) {
  check_analysis(x, window, fft, hop, frames);
  Eigen::MatrixXd out(2 * fft.bins(), frames);
#pragma omp parallel
  {
    std::vector<double> buf(fft.size());
    std::vector<std::complex<double>> spec(fft.bins());
#pragma omp for schedule(static)
    for (int t = 0; t < frames; ++t) {
      analyze_one(x, window, fft, hop, t, buf, spec, out);
    }
  }
  return out;
}

Eigen::MatrixXd synthesize_frames(const Eigen::MatrixXd& spec_in,
                                  std::span<const double> window,
                                  const signal::RealFft& fft,
                                  std::span<const double> bin_scale) {
  check_synthesis(spec_in, window, fft, bin_scale);
  const int frames = static_cast<int>(spec_in.cols());
  Eigen::MatrixXd out(fft.size(), frames);
#pragma omp parallel
  {
    std::vector<double> buf(fft.size());
    std::vector<std::complex<double>> spec(fft.bins());
#pragma omp for schedule(static)
    for (int t = 0; t < frames; ++t) {
      synthesize_one(spec_in, window, fft, bin_scale, t, spec, buf, out);
    }
  }
  return out;
}

// Each output sample gathers its covering frames in ascending frame order,
// which reproduces the serial summation order exactly.
void overlap_add(const Eigen::MatrixXd& frames, int hop,
                 std::span<double> out) {
  const long n = frames.rows();
  const long num_frames = frames.cols();
  const long len = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
  for (long s = 0; s < len; ++s) {
    double acc = 0.0;
    // Frames t with t*hop <= s < t*hop + n.
    long t_first = s >= n ? (s - n) / hop + 1 : 0;
    long t_last = std::min(s / hop, num_frames - 1);
    for (long t = t_first; t <= t_last; ++t) acc += frames(s - t * hop, t);
    out[s] = acc;
  }
}

}  // namespace omp

}  // namespace lgtse::kernels
