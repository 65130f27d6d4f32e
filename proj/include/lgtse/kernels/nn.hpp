// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>

// Column-parallel network kernels. `serial` is the reference; `omp` splits
// independent columns over threads and must match it bit for bit.
namespace lgtse::kernels {

namespace serial {

// Softmax of every column independently.
Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits);
// dL/dlogits given the softmax output `probs` and dL/dprobs.
Eigen::MatrixXd softmax_cols_vjp(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad);

// Causal dilated im2col: block j (rows [j*C, (j+1)*C)) of column t holds
// x[:, t - (k-1-j)*dilation], zero before the start.
Eigen::MatrixXd im2col_causal(const Eigen::MatrixXd& x, int kernel,
                              int dilation);
// Adjoint of im2col_causal.
Eigen::MatrixXd col2im_causal(const Eigen::MatrixXd& cols, int channels,
                              int kernel, int dilation);

// Element-wise complex product of two [2F x T] stacks.
Eigen::MatrixXd complex_mul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace serial

namespace omp {

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits);
Eigen::MatrixXd softmax_cols_vjp(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad);
Eigen::MatrixXd im2col_causal(const Eigen::MatrixXd& x, int kernel,
                              int dilation);
Eigen::MatrixXd col2im_causal(const Eigen::MatrixXd& cols, int channels,
                              int kernel, int dilation);
Eigen::MatrixXd complex_mul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace omp

}  // namespace lgtse::kernels
