// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lgtse/common/condition.hpp"
#include "lgtse/signal/waveform.hpp"

// Training objectives. Every loss returns its value and, on request, the
// exact gradient with respect to each estimate so that per-item graphs can be
// back-propagated independently.
namespace lgtse::losses {

inline constexpr double kDefaultConsistencyWeight = 50.0;
// The error energy in the SI-SDR objective is floored at this fraction of the
// target energy, which bounds a perfect estimate at +80 dB.
inline constexpr double kSiSdrGuard = 1e-8;

// w * mean_t |a[t] - b[t]|. Gradients (optional) use sign(0) = 0.
double triplec_loss(std::span<const double> a, std::span<const double> b,
                    double w, std::vector<double>* grad_a = nullptr,
                    std::vector<double>* grad_b = nullptr);
double triplec_loss(const Waveform& a, const Waveform& b, double w);

// Guarded SI-SDR in dB of one estimate (no clamp, no mean removal).
double guarded_si_sdr(std::span<const double> estimate,
                      std::span<const double> target,
                      std::vector<double>* grad = nullptr);

// -sum_i SI-SDR(estimate_i, target).
double si_sdr_loss(const std::vector<std::span<const double>>& estimates,
                   std::span<const double> target,
                   std::vector<std::vector<double>>* grads = nullptr);
double si_sdr_loss(const std::vector<Waveform>& estimates, const Waveform& s);

struct ConditionOutput {
  Condition condition;
  std::span<const double> estimate;
};

struct LossBundle {
  double l_sisdr = 0.0;
  double l_triplec = 0.0;
  double l_total = 0.0;
  double w = kDefaultConsistencyWeight;
  // Conditions coupled by the consistency term, when it applies.
  std::optional<std::pair<Condition, Condition>> pair;
  // Per-output SI-SDR in dB, aligned with the outputs passed in.
  std::vector<double> si_sdr_terms;
};

// Combined objective for one target under the given mode:
//   condition-wise / shuffled: one output, SI-SDR only;
//   triplec: 1spk+noise and 2spk+noise outputs, SI-SDR on both plus the
//            consistency term between them;
//   triplec-parallel: all three outputs, SI-SDR on all, consistency between
//            the two noisy conditions only.
// Throws kMode when a required condition is missing or unexpected outputs
// are present. `grads` receives dL/d(estimate) aligned with `outputs`.
LossBundle total_loss(const std::vector<ConditionOutput>& outputs,
                      std::span<const double> target, const TrainingMode& mode,
                      double w = kDefaultConsistencyWeight,
                      std::vector<std::vector<double>>* grads = nullptr);

}  // namespace lgtse::losses
