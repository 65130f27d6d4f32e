// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lgtse/autodiff/tape.hpp"
#include "lgtse/data/data.hpp"
#include "lgtse/losses/losses.hpp"
#include "lgtse/model/lgtse_model.hpp"

namespace lgtse::training {

struct ScheduleConfig {
  double lr0 = 5e-4;
  double decay_a = 0.98;
  double decay_b = 0.9;
  int decay_a_every = 2;
  int decay_b_every = 2;
  int phase_a_epochs = 100;  // decay_a applies before this epoch, decay_b after
  double clip_norm = 1.0;
  int epochs_total = 120;

  void validate() const;
};

// lr0 * decay_a^floor(min(e, A) / a_every) * decay_b^floor(max(e - A, 0) / b_every).
// Throws kDomain outside [0, epochs_total).
double lr_at(int epoch, const ScheduleConfig& cfg);

double global_norm(const ad::Gradients& g);

struct ClipReport {
  double norm = 0.0;          // before clipping
  double clipped_norm = 0.0;  // after
};

inline constexpr double kClipEps = 1e-6;

// Rescales every array by max_norm / (norm + kClipEps) when norm > max_norm,
// so the clipped norm never exceeds max_norm. Throws kTraining when any entry
// is non-finite.
ClipReport clip_gradients(ad::Gradients& grads, double max_norm);

enum class Stage { kPretrainDenoiser, kPretrainBackbone, kFinetuneJoint };

const char* stage_name(Stage s);
std::optional<Stage> parse_stage(const std::string& s);

struct StageConfig {
  Stage stage = Stage::kFinetuneJoint;
  TrainingMode mode = TrainingMode::triplec_parallel();
  double w = losses::kDefaultConsistencyWeight;
  int epochs = 1;

  // The pretraining stages freeze the complementary component.
  std::vector<ad::ParamGroup> frozen() const;
  model::Trainable trainable() const;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(const ad::ParameterStore& store, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  // Updates parameters whose group is trainable; others stay bit-identical.
  void step(ad::ParameterStore& store, const ad::Gradients& grads, double lr,
            const model::Trainable& trainable);

  // Moments and per-parameter step counts, for checkpoints.
  std::vector<ad::Matrix>& first() { return m_; }
  std::vector<ad::Matrix>& second() { return v_; }
  std::vector<std::int64_t>& steps() { return t_; }

 private:
  double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  std::vector<ad::Matrix> m_, v_;
  std::vector<std::int64_t> t_;
};

struct StepReport {
  Stage stage = Stage::kFinetuneJoint;
  // Means over the batch's target groups.
  double l_total = 0.0, l_sisdr = 0.0, l_triplec = 0.0;
  double grad_norm = 0.0;          // before clipping
  double grad_norm_clipped = 0.0;  // after clipping
  double lr = 0.0;
  bool skipped = false;
  std::size_t groups = 0;
  std::size_t consistency_terms = 0;
  std::vector<double> si_sdr_terms;  // one per forward item, batch order
  std::vector<Condition> conditions;  // one per forward item
  std::vector<std::size_t> triplets;  // one per forward item
};

// Per-item target for denoiser pretraining: the mixture without its noise.
const Waveform& denoising_target(const data::ConditionTriplet& t, Condition c);

// Forward, loss and gradients for one batch without touching parameters.
// Gradients are the mean over groups; items are evaluated concurrently and
// reduced in batch order.
StepReport evaluate_batch(const model::LgtseModel& model,
                          const std::vector<data::ConditionTriplet>& pool,
                          const data::Batch& batch, const StageConfig& stage,
                          ad::Gradients* grads);

struct TrainerState {
  Adam optimizer;
  int consecutive_skips = 0;
  std::int64_t step = 0;
};

inline constexpr int kMaxConsecutiveSkips = 3;

// One optimization step. A non-finite loss or gradient skips the update and
// increments the skip counter; the third consecutive skip throws kTraining.
StepReport train_step(model::LgtseModel& model,
                      const std::vector<data::ConditionTriplet>& pool,
                      const data::Batch& batch, const StageConfig& stage,
                      TrainerState& state, double lr, double clip_norm);

struct TrainConfig {
  model::ModelConfig model;
  ScheduleConfig schedule;
  std::vector<StageConfig> stages;
  std::size_t batch_size = 4;  // target groups per step
  // Shuffled batches hold batch_size * shuffled_scale single items so every
  // mode sees the same number of mixtures per step.
  std::size_t shuffled_scale = 3;
  std::uint64_t seed = 0;
  // Optional cap on optimizer steps per stage (0 = full epochs).
  std::int64_t max_steps_per_stage = 0;

  void validate() const;
  std::size_t batch_size_for(const TrainingMode& mode) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const TrainingMode& m);
TrainingMode mode_from_json(const nlohmann::json& j);

// Default stage list: denoiser pretraining, backbone pretraining, joint
// finetuning, all in `mode`.
std::vector<StageConfig> default_stages(const TrainingMode& mode, double w,
                                        int pretrain_epochs, int finetune_epochs);

struct EpochSummary {
  std::size_t stage_index = 0;
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  int steps = 0;
  int skipped = 0;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path log_path;
  std::vector<EpochSummary> epochs;  // epochs run by this call
};

struct RunOptions {
  bool resume = false;
  // Stop after this many epochs in this call (0 = run to completion); used to
  // exercise interruption and resume.
  int stop_after_epochs = 0;
  std::function<void(const StepReport&)> on_step;
};

// Runs the stages in order over `pool`, checkpointing after every epoch into
// `run_dir/checkpoints/` (atomic directory rename) and appending JSON lines
// to `run_dir/train_log.jsonl`.
TrainResult run_training(const TrainConfig& cfg,
                         const std::vector<data::ConditionTriplet>& pool,
                         const std::filesystem::path& run_dir,
                         const RunOptions& options = {});

// Loads parameters (and model config) from a checkpoint directory.
model::LgtseModel load_checkpoint(const std::filesystem::path& checkpoint);
// Resolves run_dir/checkpoints/latest; empty when absent.
std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

}  // namespace lgtse::training
