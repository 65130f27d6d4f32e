// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "lgtse/autodiff/tape.hpp"
#include "lgtse/signal/spectro.hpp"

// Differentiable operations. Feature maps are [channels x frames]; waveforms
// are [samples x 1] column vectors; complex stacks are [2F x T].
namespace lgtse::ad {

Var matmul(Var a, Var b);
Var matmul_tn(Var a, Var b);  // a^T b
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double c);
Var add_bias(Var x, Var bias);         // bias [rows x 1] broadcast over columns
Var linear(Var w, Var x, Var bias);    // w x + bias
Var tanh(Var x);
Var sigmoid(Var x);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var x, long start, long count);
Var sum(Var x);                        // [1 x 1]
Var squared_norm(Var x);               // [1 x 1]

Var softmax_cols(Var logits);

// Causal dilated 1-D convolution over columns; w is [out x in*kernel].
Var conv1d_causal(Var w, Var x, Var bias, int kernel, int dilation);

// Single-layer GRU over columns with zero initial state. Gate order r, z, n:
//   r = s(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = s(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
// wx [3H x in], wh [3H x H], bx/bh [3H x 1]; returns [H x T].
Var gru(Var x, Var wx, Var wh, Var bx, Var bh);

Var complex_mul(Var a, Var b);
// Per-bin magnitude sqrt(re^2 + im^2 + eps); [2F x T] -> [F x T].
Var complex_abs(Var x, double eps = 1e-12);
// Per-bin magnitude power with phase preserved (compression / expansion).
Var magnitude_power(Var x, double gamma);

Var stft(Var signal, const signal::SpectroConfig& cfg);
Var istft(Var spec, const signal::SpectroConfig& cfg, std::size_t out_len);

}  // namespace lgtse::ad
