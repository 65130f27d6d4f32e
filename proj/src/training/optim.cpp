// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "lgtse/common/error.hpp"
#include "lgtse/training/training.hpp"

namespace lgtse::training {

void ScheduleConfig::validate() const {
  require(lr0 > 0.0 && std::isfinite(lr0), ErrorKind::kConfig, "lr0 must be > 0");
  require(decay_a > 0.0 && decay_a <= 1.0 && decay_b > 0.0 && decay_b <= 1.0,
          ErrorKind::kConfig, "decay factors must lie in (0, 1]");
  require(decay_a_every >= 1 && decay_b_every >= 1 && phase_a_epochs >= 0,
          ErrorKind::kConfig, "decay cadence must be >= 1 epoch");
  require(clip_norm > 0.0, ErrorKind::kConfig, "clip_norm must be > 0");
  require(epochs_total >= 1, ErrorKind::kConfig, "epochs_total must be >= 1");
}

double lr_at(int epoch, const ScheduleConfig& cfg) {
  require(epoch >= 0 && epoch < cfg.epochs_total, ErrorKind::kDomain,
          "epoch " + std::to_string(epoch) + " outside [0, " +
              std::to_string(cfg.epochs_total) + ")");
  const int a = std::min(epoch, cfg.phase_a_epochs) / cfg.decay_a_every;
  const int b = std::max(epoch - cfg.phase_a_epochs, 0) / cfg.decay_b_every;
  return cfg.lr0 * std::pow(cfg.decay_a, a) * std::pow(cfg.decay_b, b);
}

double global_norm(const ad::Gradients& g) {
  double s = 0.0;
  for (const auto& m : g) s += m.squaredNorm();
  return std::sqrt(s);
}

ClipReport clip_gradients(ad::Gradients& grads, double max_norm) {
  require(max_norm > 0.0, ErrorKind::kConfig, "max_norm must be > 0");
  for (const auto& m : grads) {
    require(m.allFinite(), ErrorKind::kTraining,
            "non-finite gradient entry; step aborted");
  }
  ClipReport r;
  r.norm = global_norm(grads);
  r.clipped_norm = r.norm;
  if (r.norm > max_norm) {
    // The small offset keeps rounding from landing a hair above max_norm.
    const double s = max_norm / (r.norm + kClipEps);
    for (auto& m : grads) m *= s;
    r.clipped_norm = global_norm(grads);
  }
  return r;
}

Adam::Adam(const ad::ParameterStore& store, double beta1, double beta2,
           double eps)
    : b1_(beta1), b2_(beta2), eps_(eps) {
  m_ = store.zeros();
  v_ = store.zeros();
  t_.assign(store.size(), 0);
}

void Adam::step(ad::ParameterStore& store, const ad::Gradients& grads,
                double lr, const model::Trainable& trainable) {
  require(grads.size() == store.size() && m_.size() == store.size(),
          ErrorKind::kShape, "optimizer state does not match the parameters");
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    const bool on = p.group == ad::ParamGroup::kDenoiser ? trainable.denoiser
                                                         : trainable.backbone;
    if (!on) continue;
    const ad::Matrix& g = grads[i];
    const std::int64_t t = ++t_[i];
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t));
    p.value.array() -= lr * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace lgtse::training
