// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgtse/common/error.hpp"

namespace lgtse::losses {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double triplec_loss(std::span<const double> a, std::span<const double> b,
                    double w, std::vector<double>* grad_a,
                    std::vector<double>* grad_b) {
  require(a.size() == b.size(), ErrorKind::kShape,
          "consistency loss needs equal lengths");
  require(!a.empty(), ErrorKind::kLength, "consistency loss of empty signals");
  const double n = static_cast<double>(a.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  if (grad_a || grad_b) {
    const double k = w / n;
    if (grad_a) grad_a->assign(a.size(), 0.0);
    if (grad_b) grad_b->assign(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      const double s = d > 0.0 ? k : (d < 0.0 ? -k : 0.0);
      if (grad_a) (*grad_a)[i] = s;
      if (grad_b) (*grad_b)[i] = -s;
    }
  }
  return w * acc / n;
}

double triplec_loss(const Waveform& a, const Waveform& b, double w) {
  return triplec_loss(a.samples, b.samples, w);
}

double guarded_si_sdr(std::span<const double> estimate,
                      std::span<const double> target,
                      std::vector<double>* grad) {
  require(estimate.size() == target.size(), ErrorKind::kShape,
          "SI-SDR needs equal lengths");
  const double ss = dot(target, target);
  require(ss > 0.0, ErrorKind::kDomain, "SI-SDR target is identically zero");
  const double proj = dot(estimate, target);
  const double alpha = proj / ss;
  const double num = alpha * alpha * ss;
  double err = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = alpha * target[i] - estimate[i];
    err += e * e;
  }
  const double floor = kSiSdrGuard * ss;
  const bool guarded = err < floor;
  const double den = guarded ? floor : err;
  if (grad) {
    // d ln(num) = 2 s / <est, s>;  d ln(err) = 2 (est - alpha s) / err.
    grad->assign(estimate.size(), 0.0);
    for (std::size_t i = 0; i < target.size(); ++i) {
      double g = proj != 0.0 ? 2.0 * target[i] / proj : 0.0;
      if (!guarded) g -= 2.0 * (estimate[i] - alpha * target[i]) / err;
      (*grad)[i] = kDbPerNeper * g;
    }
  }
  return kDbPerNeper * std::log(num / den);
}

double si_sdr_loss(const std::vector<std::span<const double>>& estimates,
                   std::span<const double> target,
                   std::vector<std::vector<double>>* grads) {
  require(!estimates.empty(), ErrorKind::kShape, "no estimates");
  double loss = 0.0;
  if (grads) grads->assign(estimates.size(), {});
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    std::vector<double>* g = grads ? &(*grads)[i] : nullptr;
    loss -= guarded_si_sdr(estimates[i], target, g);
    if (g) {
      for (double& v : *g) v = -v;
    }
  }
  return loss;
}

double si_sdr_loss(const std::vector<Waveform>& estimates, const Waveform& s) {
  std::vector<std::span<const double>> spans;
  for (const auto& e : estimates) spans.emplace_back(e.samples);
  return si_sdr_loss(spans, s.samples);
}

LossBundle total_loss(const std::vector<ConditionOutput>& outputs,
                      std::span<const double> target, const TrainingMode& mode,
                      double w, std::vector<std::vector<double>>* grads) {
  require(!outputs.empty(), ErrorKind::kMode, "no outputs for loss");
  std::array<int, 3> slot = {-1, -1, -1};
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    auto& s = slot[index(outputs[i].condition)];
    require(s < 0, ErrorKind::kMode,
            "duplicate output for condition " +
                std::string(label(outputs[i].condition)));
    s = static_cast<int>(i);
  }
  auto has = [&](Condition c) { return slot[index(c)] >= 0; };

  using Kind = TrainingMode::Kind;
  std::optional<std::pair<Condition, Condition>> pair;
  switch (mode.kind) {
    case Kind::kConditionWise:
      require(outputs.size() == 1 && has(mode.condition), ErrorKind::kMode,
              "condition-wise mode expects exactly one " +
                  std::string(label(mode.condition)) + " output");
      break;
    case Kind::kShuffled:
      require(outputs.size() == 1, ErrorKind::kMode,
              "shuffled mode expects exactly one output per target");
      break;
    case Kind::kTripleC:
      require(outputs.size() == 2 && has(Condition::kSingleNoise) &&
                  has(Condition::kTwoSpeakerNoise),
              ErrorKind::kMode,
              "triplec mode expects 1spk+noise and 2spk+noise outputs");
      pair = {Condition::kSingleNoise, Condition::kTwoSpeakerNoise};
      break;
    case Kind::kTripleCParallel:
      require(outputs.size() == 3, ErrorKind::kMode,
              "triplec-parallel mode expects all three condition outputs");
      pair = {Condition::kSingleNoise, Condition::kTwoSpeakerNoise};
      break;
  }

  LossBundle b;
  b.w = w;
  b.pair = pair;
  if (grads) grads->assign(outputs.size(), {});
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::vector<double>* g = grads ? &(*grads)[i] : nullptr;
    const double v = guarded_si_sdr(outputs[i].estimate, target, g);
    b.si_sdr_terms.push_back(v);
    b.l_sisdr -= v;
    if (g) {
      for (double& x : *g) x = -x;
    }
  }
  if (pair) {
    const auto ia = static_cast<std::size_t>(slot[index(pair->first)]);
    const auto ib = static_cast<std::size_t>(slot[index(pair->second)]);
    std::vector<double> ga, gb;
    b.l_triplec = triplec_loss(outputs[ia].estimate, outputs[ib].estimate, w,
                               grads ? &ga : nullptr, grads ? &gb : nullptr);
    if (grads) {
      for (std::size_t t = 0; t < ga.size(); ++t) {
        (*grads)[ia][t] += ga[t];
        (*grads)[ib][t] += gb[t];
      }
    }
  }
  b.l_total = b.l_sisdr + b.l_triplec;
  return b;
}

}  // namespace lgtse::losses
