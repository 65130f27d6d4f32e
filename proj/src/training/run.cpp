// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstdio>
#include <fstream>
#include <spdlog/spdlog.h>
#include <sstream>

#include "lgtse/common/error.hpp"
#include "lgtse/common/seed.hpp"
#include "lgtse/model/serialize.hpp"
#include "lgtse/training/training.hpp"

namespace lgtse::training {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config serialization ----

void to_json(json& j, const TrainingMode& m) {
  j = {{"kind", mode_name(m.kind)}};
  if (m.kind == TrainingMode::Kind::kConditionWise) {
    j["condition"] = label(m.condition);
  }
}

TrainingMode mode_from_json(const json& j) {
  const auto kind = parse_mode_kind(j.at("kind").get<std::string>());
  require(kind.has_value(), ErrorKind::kConfig,
          "unknown training mode '" + j.at("kind").get<std::string>() + "'");
  TrainingMode m{*kind, Condition::kTwoSpeakerNoise};
  if (*kind == TrainingMode::Kind::kConditionWise) {
    require(j.contains("condition"), ErrorKind::kConfig,
            "condition-wise mode needs a condition");
    const auto c = parse_condition(j.at("condition").get<std::string>());
    require(c.has_value(), ErrorKind::kConfig, "unknown condition in mode");
    m.condition = *c;
  }
  return m;
}

void to_json(json& j, const TrainConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    json m;
    to_json(m, s.mode);
    stages.push_back(
        {{"stage", stage_name(s.stage)}, {"mode", m}, {"w", s.w}, {"epochs", s.epochs}});
  }
  const ScheduleConfig& s = c.schedule;
  j = {{"model", c.model},
       {"schedule",
        {{"lr0", s.lr0},
         {"decay_a", s.decay_a},
         {"decay_b", s.decay_b},
         {"decay_a_every", s.decay_a_every},
         {"decay_b_every", s.decay_b_every},
         {"phase_a_epochs", s.phase_a_epochs},
         {"clip_norm", s.clip_norm},
         {"epochs_total", s.epochs_total}}},
       {"stages", stages},
       {"batch_size", c.batch_size},
       {"shuffled_scale", c.shuffled_scale},
       {"seed", c.seed},
       {"max_steps_per_stage", c.max_steps_per_stage}};
}

void from_json(const json& j, TrainConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<model::ModelConfig>();
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    ScheduleConfig& d = c.schedule;
    d.lr0 = s.value("lr0", d.lr0);
    d.decay_a = s.value("decay_a", d.decay_a);
    d.decay_b = s.value("decay_b", d.decay_b);
    d.decay_a_every = s.value("decay_a_every", d.decay_a_every);
    d.decay_b_every = s.value("decay_b_every", d.decay_b_every);
    d.phase_a_epochs = s.value("phase_a_epochs", d.phase_a_epochs);
    d.clip_norm = s.value("clip_norm", d.clip_norm);
    d.epochs_total = s.value("epochs_total", d.epochs_total);
  }
  if (j.contains("stages")) {
    c.stages.clear();
    for (const json& s : j.at("stages")) {
      StageConfig st;
      const auto stage = parse_stage(s.at("stage").get<std::string>());
      require(stage.has_value(), ErrorKind::kConfig,
              "unknown stage '" + s.at("stage").get<std::string>() + "'");
      st.stage = *stage;
      st.mode = mode_from_json(s.at("mode"));
      st.w = s.value("w", st.w);
      st.epochs = s.value("epochs", st.epochs);
      c.stages.push_back(st);
    }
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.shuffled_scale = j.value("shuffled_scale", c.shuffled_scale);
  c.seed = j.value("seed", c.seed);
  c.max_steps_per_stage = j.value("max_steps_per_stage", c.max_steps_per_stage);
}

void TrainConfig::validate() const {
  model.validate();
  schedule.validate();
  require(!stages.empty(), ErrorKind::kConfig, "no training stages");
  require(batch_size >= 1 && shuffled_scale >= 1, ErrorKind::kConfig,
          "batch_size and shuffled_scale must be >= 1");
  require(max_steps_per_stage >= 0, ErrorKind::kConfig,
          "max_steps_per_stage must be >= 0");
  for (const auto& s : stages) {
    require(s.epochs >= 1 && s.epochs <= schedule.epochs_total,
            ErrorKind::kConfig,
            "stage epochs must lie in [1, schedule.epochs_total]");
    require(s.w >= 0.0 && std::isfinite(s.w), ErrorKind::kConfig,
            "consistency weight must be >= 0");
  }
}

std::size_t TrainConfig::batch_size_for(const TrainingMode& mode) const {
  return mode.kind == TrainingMode::Kind::kShuffled ? batch_size * shuffled_scale
                                                    : batch_size;
}

std::vector<StageConfig> default_stages(const TrainingMode& mode, double w,
                                        int pretrain_epochs, int finetune_epochs) {
  return {{Stage::kPretrainDenoiser, mode, w, pretrain_epochs},
          {Stage::kPretrainBackbone, mode, w, pretrain_epochs},
          {Stage::kFinetuneJoint, mode, w, finetune_epochs}};
}

// ---- checkpoints ----

namespace {

struct Position {
  std::size_t stage = 0;
  int epoch = 0;  // next epoch to run within `stage`
};

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string checkpoint_name(std::size_t stage, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%zu-e%03d", stage, epoch);
  return buf;
}

void save_checkpoint(const fs::path& dir, const std::string& name,
                     const model::LgtseModel& m, const TrainerState& state,
                     const json& cfg, std::size_t stage, int epoch,
                     Position next) {
  const fs::path tmp = dir / (".tmp-" + name);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  json extra = {{"stage_index", stage},
                {"stage", cfg.at("stages").at(stage).at("stage")},
                {"epoch", epoch},
                {"step", state.step},
                {"consecutive_skips", state.consecutive_skips},
                {"next", {{"stage_index", next.stage}, {"epoch", next.epoch}}},
                {"train_config", cfg}};
  model::save_model(m, tmp, extra);
  {
    Adam opt = state.optimizer;
    std::ofstream out(tmp / "optimizer.bin", std::ios::binary);
    model::write_matrices(out, opt.first());
    model::write_matrices(out, opt.second());
    out.write(reinterpret_cast<const char*>(opt.steps().data()),
              static_cast<std::streamsize>(opt.steps().size() * sizeof(std::int64_t)));
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write optimizer state");
  }
  const fs::path final_dir = dir / name;
  fs::remove_all(final_dir, ec);
  fs::rename(tmp, final_dir);
  write_text_atomic(dir / "latest", name + "\n");
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + p.string());
  return json::parse(in);
}

// Drops log lines recorded after the checkpoint we resume from.
void trim_log(const fs::path& log, std::int64_t last_step) {
  if (!fs::exists(log)) return;
  std::ifstream in(log);
  std::ostringstream kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    if (j.value("step", std::int64_t{0}) > last_step) continue;
    kept << line << '\n';
  }
  in.close();
  write_text_atomic(log, kept.str());
}

}  // namespace

fs::path latest_checkpoint(const fs::path& run_dir) {
  const fs::path p = run_dir / "checkpoints" / "latest";
  std::ifstream in(p);
  if (!in) return {};
  std::string name;
  std::getline(in, name);
  if (name.empty()) return {};
  return run_dir / "checkpoints" / name;
}

model::LgtseModel load_checkpoint(const fs::path& checkpoint) {
  return model::load_model(checkpoint);
}

TrainResult run_training(const TrainConfig& cfg,
                         const std::vector<data::ConditionTriplet>& pool,
                         const fs::path& run_dir, const RunOptions& options) {
  cfg.validate();
  require(!pool.empty(), ErrorKind::kCapacity, "training pool is empty");
  const fs::path ckpt_dir = run_dir / "checkpoints";
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  {
    const fs::path probe = ckpt_dir / ".write-probe";
    std::ofstream out(probe);
    require(!ec && static_cast<bool>(out), ErrorKind::kIo,
            "checkpoint directory is not writable: " + ckpt_dir.string());
    out.close();
    fs::remove(probe, ec);
  }
  const json cfg_json = cfg;
  const fs::path log_path = run_dir / "train_log.jsonl";

  model::LgtseModel m(cfg.model);
  TrainerState state;
  Position pos;
  bool fresh_optimizer = true;
  if (options.resume) {
    const fs::path latest = latest_checkpoint(run_dir);
    require(!latest.empty(), ErrorKind::kIo,
            "--resume given but no checkpoint under " + ckpt_dir.string());
    const json man = read_json(latest / "manifest.json");
    require(man.at("train_config") == cfg_json, ErrorKind::kConfig,
            "resume config differs from the checkpoint's config");
    m = model::load_model(latest);
    state.optimizer = Adam(m.parameters());
    std::ifstream in(latest / "optimizer.bin", std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::kIo, "checkpoint lacks optimizer state");
    std::vector<ad::Matrix> m1 = m.parameters().zeros(), m2 = m.parameters().zeros();
    for (auto* v : {&m1, &m2}) {
      for (auto& a : *v) {
        in.read(reinterpret_cast<char*>(a.data()),
                static_cast<std::streamsize>(a.size() * sizeof(double)));
      }
    }
    std::vector<std::int64_t> t(m.parameters().size());
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(std::int64_t)));
    require(static_cast<bool>(in), ErrorKind::kIo, "optimizer state is truncated");
    state.optimizer.first() = std::move(m1);
    state.optimizer.second() = std::move(m2);
    state.optimizer.steps() = std::move(t);
    state.step = man.at("step");
    state.consecutive_skips = man.at("consecutive_skips");
    pos.stage = man.at("next").at("stage_index");
    pos.epoch = man.at("next").at("epoch");
    fresh_optimizer = pos.epoch == 0;
    trim_log(log_path, state.step);
    spdlog::info("resuming from {} at stage {} epoch {}", latest.string(), pos.stage,
                 pos.epoch);
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  std::ofstream log(log_path, std::ios::app);
  require(static_cast<bool>(log), ErrorKind::kIo, "cannot open " + log_path.string());

  TrainResult result;
  result.log_path = log_path;
  result.final_checkpoint = latest_checkpoint(run_dir);
  int epochs_run = 0;
  std::string previous = result.final_checkpoint.empty()
                             ? std::string()
                             : result.final_checkpoint.filename().string();

  for (std::size_t si = pos.stage; si < cfg.stages.size(); ++si) {
    const StageConfig& st = cfg.stages[si];
    if (fresh_optimizer) state.optimizer = Adam(m.parameters());
    fresh_optimizer = true;
    const std::size_t bs = cfg.batch_size_for(st.mode);
    // Steps already taken in this stage (for the optional cap).
    std::int64_t stage_steps = 0;
    if (si == pos.stage && pos.epoch > 0 && cfg.max_steps_per_stage > 0) {
      for (int e = 0; e < pos.epoch; ++e) {
        stage_steps += static_cast<std::int64_t>(
            data::plan_epoch(pool, bs, st.mode,
                             derive_seed(cfg.seed, {si, static_cast<uint64_t>(e)}))
                .size());
      }
    }
    const int first_epoch = si == pos.stage ? pos.epoch : 0;
    for (int e = first_epoch; e < st.epochs; ++e) {
      const double lr = lr_at(e, cfg.schedule);
      const std::vector<data::Batch> batches = data::plan_epoch(
          pool, bs, st.mode, derive_seed(cfg.seed, {si, static_cast<uint64_t>(e)}));
      EpochSummary sum{si, e, lr, 0.0, 0, 0};
      bool capped = false;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        if (cfg.max_steps_per_stage > 0 && stage_steps >= cfg.max_steps_per_stage) {
          capped = true;
          break;
        }
        const StepReport r =
            train_step(m, pool, batches[b], st, state, lr, cfg.schedule.clip_norm);
        ++stage_steps;
        ++sum.steps;
        if (r.skipped) {
          ++sum.skipped;
        } else {
          sum.mean_loss += r.l_total;
        }
        json conds = json::array();
        for (Condition c : r.conditions) conds.push_back(label(c));
        json rec = {{"type", "step"},
                    {"stage", stage_name(st.stage)},
                    {"stage_index", si},
                    {"epoch", e},
                    {"batch", b},
                    {"step", state.step},
                    {"l_total", r.l_total},
                    {"l_sisdr", r.l_sisdr},
                    {"l_triplec", r.l_triplec},
                    {"lr", lr},
                    {"grad_norm", r.skipped ? json(nullptr) : json(r.grad_norm)},
                    {"grad_norm_clipped",
                     r.skipped ? json(nullptr) : json(r.grad_norm_clipped)},
                    {"skipped", r.skipped},
                    {"conditions", conds},
                    {"triplets", r.triplets}};
        log << rec.dump() << '\n';
        if (options.on_step) options.on_step(r);
      }
      if (sum.steps > sum.skipped) sum.mean_loss /= (sum.steps - sum.skipped);
      log.flush();
      const bool stage_done = capped || e + 1 == st.epochs ||
                              (cfg.max_steps_per_stage > 0 &&
                               stage_steps >= cfg.max_steps_per_stage);
      const Position next = stage_done ? Position{si + 1, 0} : Position{si, e + 1};
      const std::string name = checkpoint_name(si, e);
      save_checkpoint(ckpt_dir, name, m, state, cfg_json, si, e, next);
      // Keep the last checkpoint of every stage plus the newest one.
      if (!previous.empty() && previous != name) {
        const json pm = read_json(ckpt_dir / previous / "manifest.json");
        if (pm.at("next").at("stage_index") == pm.at("stage_index")) {
          fs::remove_all(ckpt_dir / previous, ec);
        }
      }
      previous = name;
      result.final_checkpoint = ckpt_dir / name;
      json rec = {{"type", "epoch"},     {"stage", stage_name(st.stage)},
                  {"stage_index", si},   {"epoch", e},
                  {"step", state.step},  {"lr", lr},
                  {"mean_loss", sum.mean_loss}, {"steps", sum.steps},
                  {"skipped", sum.skipped},     {"checkpoint", name}};
      log << rec.dump() << '\n';
      log.flush();
      spdlog::info("{} epoch {}: lr {:.3g} loss {:.4f} ({} steps)",
                   stage_name(st.stage), e, lr, sum.mean_loss, sum.steps);
      result.epochs.push_back(sum);
      ++epochs_run;
      if (options.stop_after_epochs > 0 && epochs_run >= options.stop_after_epochs) {
        return result;
      }
      if (stage_done) break;
    }
  }
  return result;
}

}  // namespace lgtse::training
