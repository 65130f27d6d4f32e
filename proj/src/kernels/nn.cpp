// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/kernels/nn.hpp"

#include <cmath>

#include "lgtse/common/error.hpp"

namespace lgtse::kernels {

namespace {

void softmax_col(const Eigen::MatrixXd& logits, long j, Eigen::MatrixXd& out) {
  const double mx = logits.col(j).maxCoeff();
  double sum = 0.0;
  for (long i = 0; i < logits.rows(); ++i) {
    const double e = std::exp(logits(i, j) - mx);
    out(i, j) = e;
    sum += e;
  }
  for (long i = 0; i < logits.rows(); ++i) out(i, j) /= sum;
}

void softmax_vjp_col(const Eigen::MatrixXd& p, const Eigen::MatrixXd& g,
                     long j, Eigen::MatrixXd& out) {
  double dot = 0.0;
  for (long i = 0; i < p.rows(); ++i) dot += p(i, j) * g(i, j);
  for (long i = 0; i < p.rows(); ++i) out(i, j) = p(i, j) * (g(i, j) - dot);
}

void im2col_col(const Eigen::MatrixXd& x, int kernel, int dilation, long t,
                Eigen::MatrixXd& out) {
  const long c = x.rows();
  for (int j = 0; j < kernel; ++j) {
    const long src = t - static_cast<long>(kernel - 1 - j) * dilation;
    if (src >= 0) {
      out.block(j * c, t, c, 1) = x.col(src);
    } else {
      out.block(j * c, t, c, 1).setZero();
    }
  }
}

// Gathers, for input column s, every (block j, column t) that read it.
// Contributions are summed in ascending j, matching the serial scatter order
// for a fixed destination column.
void col2im_col(const Eigen::MatrixXd& cols, long channels, int kernel,
                int dilation, long s, Eigen::MatrixXd& out) {
  out.col(s).setZero();
  for (int j = 0; j < kernel; ++j) {
    const long t = s + static_cast<long>(kernel - 1 - j) * dilation;
    if (t < cols.cols()) out.col(s) += cols.block(j * channels, t, channels, 1);
  }
}

void complex_mul_col(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     long t, Eigen::MatrixXd& out) {
  const long f = a.rows() / 2;
  for (long k = 0; k < f; ++k) {
    const double ar = a(k, t), ai = a(f + k, t);
    const double br = b(k, t), bi = b(f + k, t);
    out(k, t) = ar * br - ai * bi;
    out(f + k, t) = ar * bi + ai * br;
  }
}

void check_same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kShape,
          what);
}

}  // namespace

namespace serial {

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (long j = 0; j < logits.cols(); ++j) softmax_col(logits, j, out);
  return out;
}

Eigen::MatrixXd softmax_cols_vjp(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad) {
  check_same(probs, grad, "softmax_cols_vjp shape");
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  for (long j = 0; j < probs.cols(); ++j) softmax_vjp_col(probs, grad, j, out);
  return out;
}

Eigen::MatrixXd im2col_causal(const Eigen::MatrixXd& x, int kernel,
                              int dilation) {
  require(kernel >= 1 && dilation >= 1, ErrorKind::kConfig,
          "kernel and dilation must be >= 1");
  Eigen::MatrixXd out(x.rows() * kernel, x.cols());
  for (long t = 0; t < x.cols(); ++t) im2col_col(x, kernel, dilation, t, out);
  return out;
}

Eigen::MatrixXd col2im_causal(const Eigen::MatrixXd& cols, int channels,
                              int kernel, int dilation) {
  require(cols.rows() == static_cast<long>(channels) * kernel,
          ErrorKind::kShape, "col2im rows");
  Eigen::MatrixXd out(channels, cols.cols());
  for (long s = 0; s < cols.cols(); ++s) {
    col2im_col(cols, channels, kernel, dilation, s, out);
  }
  return out;
}

Eigen::MatrixXd complex_mul(const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b) {
  check_same(a, b, "complex_mul shape");
  require(a.rows() % 2 == 0, ErrorKind::kShape, "complex stack needs 2F rows");
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (long t = 0; t < a.cols(); ++t) complex_mul_col(a, b, t, out);
  return out;
}

}  // namespace serial

namespace omp {

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
#pragma omp parallel for schedule(static)
  for (long j = 0; j < logits.cols(); ++j) softmax_col(logits, j, out);
  return out;
}

Eigen::MatrixXd softmax_cols_vjp(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad) {
  check_same(probs, grad, "softmax_cols_vjp shape");
  Eigen::MatrixXd out(probs.rows(), probs.cols());
#pragma omp parallel for schedule(static)
  for (long j = 0; j < probs.cols(); ++j) softmax_vjp_col(probs, grad, j, out);
  return out;
}

Eigen::MatrixXd im2col_causal(const Eigen::MatrixXd& x, int kernel,
                              int dilation) {
  require(kernel >= 1 && dilation >= 1, ErrorKind::kConfig,
          "kernel and dilation must be >= 1");
  Eigen::MatrixXd out(x.rows() * kernel, x.cols());
#pragma omp parallel for schedule(static)
  for (long t = 0; t < x.cols(); ++t) im2col_col(x, kernel, dilation, t, out);
  return out;
}

Eigen::MatrixXd col2im_causal(const Eigen::MatrixXd& cols, int channels,
                              int kernel, int dilation) {
  require(cols.rows() == static_cast<long>(channels) * kernel,
          ErrorKind::kShape, "col2im rows");
  Eigen::MatrixXd out(channels, cols.cols());
#pragma omp parallel for schedule(static)
  for (long s = 0; s < cols.cols(); ++s) {
    col2im_col(cols, channels, kernel, dilation, s, out);
  }
  return out;
}

Eigen::MatrixXd complex_mul(const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b) {
  check_same(a, b, "complex_mul shape");
  require(a.rows() % 2 == 0, ErrorKind::kShape, "complex stack needs 2F rows");
  Eigen::MatrixXd out(a.rows(), a.cols());
#pragma omp parallel for schedule(static)
  for (long t = 0; t < a.cols(); ++t) complex_mul_col(a, b, t, out);
  return out;
}

}  // namespace omp

}  // namespace lgtse::kernels
