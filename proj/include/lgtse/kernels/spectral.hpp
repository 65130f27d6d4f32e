// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "lgtse/signal/fft.hpp"

// Frame-level STFT building blocks. Every kernel exists twice: `serial` is the
// reference loop, `omp` distributes independent frames (or output samples)
// over OpenMP threads. Both produce bit-identical results.
namespace lgtse::kernels {

namespace serial {

// Windowed forward transform of `frames` frames of x; returns [2F x T].
Eigen::MatrixXd analyze_frames(std::span<const double> x,
                               std::span<const double> window,
                               const signal::RealFft& fft, int hop,
                               int frames);

// For each column of the [2F x T] spectrum: scale bin k by bin_scale[k],
// inverse transform (unnormalized), multiply by the window. Returns [N x T].
Eigen::MatrixXd synthesize_frames(const Eigen::MatrixXd& spec,
                                  std::span<const double> window,
                                  const signal::RealFft& fft,
                                  std::span<const double> bin_scale);

// Sums column t of `frames` into out[t*hop ...]. out is zeroed first.
void overlap_add(const Eigen::MatrixXd& frames, int hop, std::span<double> out);

}  // namespace serial

namespace omp {

Eigen::MatrixXd analyze_frames(std::span<const double> x,
                               std::span<const double> window,
                               const signal::RealFft& fft, int hop,
                               int frames);
Eigen::MatrixXd synthesize_frames(const Eigen::MatrixXd& spec,
                                  std::span<const double> window,
                                  const signal::RealFft& fft,
                                  std::span<const double> bin_scale);
void overlap_add(const Eigen::MatrixXd& frames, int hop, std::span<double> out);

}  // namespace omp

}  // namespace lgtse::kernels
