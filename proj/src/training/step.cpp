// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <memory>

#include "lgtse/common/error.hpp"
#include "lgtse/common/parallel.hpp"
#include "lgtse/training/training.hpp"

namespace lgtse::training {

namespace {

struct Item {
  std::size_t group;
  std::size_t triplet;
  Condition condition;
  std::unique_ptr<ad::Tape> tape;
  ad::Var estimate;
  std::vector<double> grad;
};

std::span<const double> values(const ad::Var& v) {
  return {v.value().data(), static_cast<std::size_t>(v.value().size())};
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kPretrainDenoiser:
      return "pretrain_denoiser";
    case Stage::kPretrainBackbone:
      return "pretrain_backbone";
    case Stage::kFinetuneJoint:
      return "finetune_joint";
  }
  return "?";
}

std::optional<Stage> parse_stage(const std::string& s) {
  for (Stage st : {Stage::kPretrainDenoiser, Stage::kPretrainBackbone,
                   Stage::kFinetuneJoint}) {
    if (s == stage_name(st)) return st;
  }
  return std::nullopt;
}

std::vector<ad::ParamGroup> StageConfig::frozen() const {
  switch (stage) {
    case Stage::kPretrainDenoiser:
      return {ad::ParamGroup::kBackbone};
    case Stage::kPretrainBackbone:
      return {ad::ParamGroup::kDenoiser};
    case Stage::kFinetuneJoint:
      break;
  }
  return {};
}

model::Trainable StageConfig::trainable() const {
  model::Trainable t;
  for (ad::ParamGroup g : frozen()) {
    (g == ad::ParamGroup::kDenoiser ? t.denoiser : t.backbone) = false;
  }
  return t;
}

const Waveform& denoising_target(const data::ConditionTriplet& t, Condition c) {
  // 1spk+noise -> s; 2spk and 2spk+noise -> s + i.
  return c == Condition::kSingleNoise ? t.target : t.y_clean2;
}

StepReport evaluate_batch(const model::LgtseModel& model,
                          const std::vector<data::ConditionTriplet>& pool,
                          const data::Batch& batch, const StageConfig& stage,
                          ad::Gradients* grads) {
  require(!batch.groups.empty(), ErrorKind::kCapacity, "empty batch");
  require(batch.mode == stage.mode, ErrorKind::kMode,
          "batch mode " + describe(batch.mode) + " differs from stage mode " +
              describe(stage.mode));
  const bool denoiser_only = stage.stage == Stage::kPretrainDenoiser;
  const model::Trainable tr = stage.trainable();
  const std::size_t n_groups = batch.groups.size();

  std::vector<Item> items;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto& grp = batch.groups[g];
    require(grp.triplet < pool.size(), ErrorKind::kShape,
            "batch references a triplet outside the pool");
    for (Condition c : grp.conditions) {
      require(pool[grp.triplet].has(c), ErrorKind::kMode,
              "triplet lacks a " + std::string(label(c)) + " mixture");
      items.push_back({g, grp.triplet, c, nullptr, {}, {}});
    }
  }

  std::vector<Eigen::MatrixXd> enroll(n_groups);
  const long ng = static_cast<long>(n_groups);
  const long ni = static_cast<long>(items.size());
  if (!denoiser_only) {
    parallel_for(ng, [&](long g) {
      enroll[g] = model.compressed_spectrum(
          pool[batch.groups[g].triplet].enrollment);
    });
  }
  parallel_for(ni, [&](long k) {
    Item& it = items[k];
    it.tape = std::make_unique<ad::Tape>();
    const Waveform& y = pool[it.triplet].mixture(it.condition);
    it.estimate = denoiser_only
                      ? model.build_denoiser(*it.tape, y, tr)
                      : model.build(*it.tape, y, enroll[it.group], tr).estimate;
  });

  StepReport r;
  r.stage = stage.stage;
  r.groups = n_groups;
  const double inv = 1.0 / static_cast<double>(n_groups);
  std::size_t k0 = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::size_t k1 = k0;
    while (k1 < items.size() && items[k1].group == g) ++k1;
    const auto& t = pool[batch.groups[g].triplet];
    if (denoiser_only) {
      for (std::size_t k = k0; k < k1; ++k) {
        const double v = losses::guarded_si_sdr(
            values(items[k].estimate),
            denoising_target(t, items[k].condition).samples,
            grads ? &items[k].grad : nullptr);
        r.si_sdr_terms.push_back(v);
        r.l_sisdr -= inv * v;
        for (double& x : items[k].grad) x = -x;
      }
    } else {
      std::vector<losses::ConditionOutput> outs;
      for (std::size_t k = k0; k < k1; ++k) {
        outs.push_back({items[k].condition, values(items[k].estimate)});
      }
      std::vector<std::vector<double>> gs;
      const losses::LossBundle b = losses::total_loss(
          outs, t.target.samples, stage.mode, stage.w, grads ? &gs : nullptr);
      r.l_sisdr += inv * b.l_sisdr;
      r.l_triplec += inv * b.l_triplec;
      if (b.pair) ++r.consistency_terms;
      r.si_sdr_terms.insert(r.si_sdr_terms.end(), b.si_sdr_terms.begin(),
                            b.si_sdr_terms.end());
      for (std::size_t k = k0; k < k1; ++k) {
        if (grads) items[k].grad = std::move(gs[k - k0]);
      }
    }
    k0 = k1;
  }
  r.l_total = r.l_sisdr + r.l_triplec;
  for (const Item& it : items) {
    r.conditions.push_back(it.condition);
    r.triplets.push_back(it.triplet);
  }

  if (grads) {
    std::vector<ad::Gradients> per_item(items.size());
    parallel_for(ni, [&](long k) {
      Item& it = items[k];
      Eigen::Map<const Eigen::VectorXd> seed(it.grad.data(),
                                             static_cast<long>(it.grad.size()));
      it.tape->backward(it.estimate, inv * seed);
      per_item[k] = model.parameters().zeros();
      it.tape->collect(per_item[k]);
      it.tape.reset();
    });
    // Fixed-order reduction keeps results independent of the thread count.
    *grads = model.parameters().zeros();
    for (const auto& g : per_item) {
      for (std::size_t i = 0; i < g.size(); ++i) (*grads)[i] += g[i];
    }
  }
  return r;
}

StepReport train_step(model::LgtseModel& model,
                      const std::vector<data::ConditionTriplet>& pool,
                      const data::Batch& batch, const StageConfig& stage,
                      TrainerState& state, double lr, double clip_norm) {
  ad::Gradients grads;
  StepReport r = evaluate_batch(model, pool, batch, stage, &grads);
  r.lr = lr;
  bool finite = std::isfinite(r.l_total);
  for (const auto& g : grads) finite = finite && g.allFinite();
  ++state.step;
  if (!finite) {
    r.skipped = true;
    r.grad_norm = r.grad_norm_clipped = std::nan("");
    ++state.consecutive_skips;
    require(state.consecutive_skips < kMaxConsecutiveSkips, ErrorKind::kTraining,
            "training aborted: " + std::to_string(kMaxConsecutiveSkips) +
                " consecutive steps with non-finite loss or gradients (last at "
                "step " + std::to_string(state.step) + ")");
    return r;
  }
  state.consecutive_skips = 0;
  const ClipReport c = clip_gradients(grads, clip_norm);
  r.grad_norm = c.norm;
  r.grad_norm_clipped = c.clipped_norm;
  state.optimizer.step(model.parameters(), grads, lr, stage.trainable());
  return r;
}

}  // namespace lgtse::training
