// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "lgtse/common/error.hpp"
#include "lgtse/training/training.hpp"
#include "support/fixtures.hpp"
#include "support/test_support.hpp"

namespace lgtse::training {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

TEST(Schedule, Examples) {
  const ScheduleConfig c;
  EXPECT_EQ(lr_at(0, c), 0.0005);
  EXPECT_EQ(lr_at(1, c), 0.0005);
  EXPECT_NEAR(lr_at(2, c), 4.9e-4, 1e-18);
  EXPECT_NEAR(lr_at(102, c), 0.0005 * std::pow(0.98, 50) * 0.9, 1e-18);
  EXPECT_NEAR(lr_at(119, c), 0.0005 * std::pow(0.98, 50) * std::pow(0.9, 9), 1e-18);
  expect_kind(ErrorKind::kDomain, [&] { lr_at(-1, c); });
  expect_kind(ErrorKind::kDomain, [&] { lr_at(120, c); });
}

TEST(Schedule, ClosedFormAndMonotone) {
  const ScheduleConfig c;
  for (int e = 0; e < 120; ++e) {
    const double want = 0.0005 * std::pow(0.98, std::min(e, 100) / 2) *
                        std::pow(0.9, std::max(e - 100, 0) / 2);
    EXPECT_NEAR(lr_at(e, c), want, 1e-15 * want) << e;
    EXPECT_GT(lr_at(e, c), 0.0);
    if (e > 0) {
      EXPECT_LE(lr_at(e, c), lr_at(e - 1, c));
    }
  }
}

ad::Gradients grads_of(std::initializer_list<std::vector<double>> vs) {
  ad::Gradients g;
  for (const auto& v : vs) g.push_back(Eigen::Map<const Eigen::MatrixXd>(v.data(), v.size(), 1));
  return g;
}

TEST(Clip, Examples) {
  auto small = grads_of({{0.3, 0.4}});
  auto r = clip_gradients(small, 1.0);
  EXPECT_DOUBLE_EQ(r.norm, 0.5);
  EXPECT_EQ(small[0](0), 0.3);
  EXPECT_EQ(small[0](1), 0.4);

  auto big = grads_of({{3.0, 4.0}});
  r = clip_gradients(big, 1.0);
  EXPECT_DOUBLE_EQ(r.norm, 5.0);
  EXPECT_NEAR(big[0](0), 3.0 / (5.0 + kClipEps), 1e-15);
  EXPECT_NEAR(big[0](1), 4.0 / (5.0 + kClipEps), 1e-15);
  EXPECT_LE(r.clipped_norm, 1.0);
  EXPECT_NEAR(r.clipped_norm, 1.0, 1e-6);

  auto zero = grads_of({{0.0, 0.0}, {0.0}});
  r = clip_gradients(zero, 1.0);
  EXPECT_EQ(r.norm, 0.0);
  EXPECT_EQ(zero[0](0), 0.0);

  // Global norm spans every array.
  auto split = grads_of({{3.0}, {4.0}});
  clip_gradients(split, 1.0);
  EXPECT_NEAR(split[0](0), 3.0 / (5.0 + kClipEps), 1e-15);
  EXPECT_NEAR(split[1](0), 4.0 / (5.0 + kClipEps), 1e-15);
}

TEST(Clip, NonFiniteIsTrainingError) {
  auto g = grads_of({{1.0, std::numeric_limits<double>::quiet_NaN()}});
  expect_kind(ErrorKind::kTraining, [&] { clip_gradients(g, 1.0); });
  auto h = grads_of({{std::numeric_limits<double>::infinity()}});
  expect_kind(ErrorKind::kTraining, [&] { clip_gradients(h, 1.0); });
}

TEST(Stages, FreezeContract) {
  StageConfig s;
  s.stage = Stage::kPretrainDenoiser;
  EXPECT_EQ(s.frozen(), std::vector<ad::ParamGroup>{ad::ParamGroup::kBackbone});
  EXPECT_TRUE(s.trainable().denoiser);
  EXPECT_FALSE(s.trainable().backbone);
  s.stage = Stage::kPretrainBackbone;
  EXPECT_EQ(s.frozen(), std::vector<ad::ParamGroup>{ad::ParamGroup::kDenoiser});
  s.stage = Stage::kFinetuneJoint;
  EXPECT_TRUE(s.frozen().empty());
  for (auto st : {Stage::kPretrainDenoiser, Stage::kPretrainBackbone, Stage::kFinetuneJoint}) {
    EXPECT_EQ(parse_stage(stage_name(st)), st);
  }
  EXPECT_FALSE(parse_stage("warmup").has_value());
}

TEST(DenoisingTarget, DropsOnlyTheNoise) {
  const auto pool = test::small_pool(3);
  const auto& t = pool[0];
  EXPECT_EQ(&denoising_target(t, Condition::kSingleNoise), &t.target);
  EXPECT_EQ(&denoising_target(t, Condition::kTwoSpeakerNoise), &t.y_clean2);
  EXPECT_EQ(&denoising_target(t, Condition::kTwoSpeaker), &t.y_clean2);
}

std::vector<ad::Matrix> snapshot(const model::LgtseModel& m, ad::ParamGroup g) {
  std::vector<ad::Matrix> out;
  for (const auto& p : m.parameters().all()) {
    if (p.group == g) out.push_back(p.value);
  }
  return out;
}

data::Batch parallel_batch(std::size_t triplet) {
  return {TrainingMode::triplec_parallel(),
          {{triplet, {kAllConditions.begin(), kAllConditions.end()}}}};
}

TEST(TrainStep, PretrainStagesFreezeComplement) {
  const auto pool = test::small_pool(3);
  for (auto [stage, frozen, moving] :
       {std::tuple{Stage::kPretrainDenoiser, ad::ParamGroup::kBackbone, ad::ParamGroup::kDenoiser},
        std::tuple{Stage::kPretrainBackbone, ad::ParamGroup::kDenoiser, ad::ParamGroup::kBackbone}}) {
    model::LgtseModel m{test::small_model_config()};
    const auto f0 = snapshot(m, frozen), m0 = snapshot(m, moving);
    TrainerState state;
    state.optimizer = Adam(m.parameters());
    const StageConfig sc{stage, TrainingMode::triplec_parallel(), 50.0, 1};
    for (int k = 0; k < 3; ++k) train_step(m, pool, parallel_batch(k), sc, state, 1e-3, 1.0);
    EXPECT_EQ(snapshot(m, frozen), f0);
    EXPECT_NE(snapshot(m, moving), m0);
  }
}

TEST(TrainStep, OneTripletReportStructure) {
  const auto pool = test::small_pool(3);
  model::LgtseModel m{test::small_model_config()};
  TrainerState state;
  state.optimizer = Adam(m.parameters());
  const StageConfig sc{Stage::kFinetuneJoint, TrainingMode::triplec_parallel(), 50.0, 1};
  const auto r = train_step(m, pool, parallel_batch(2), sc, state, 1e-3, 1.0);
  EXPECT_EQ(r.si_sdr_terms.size(), 3u);
  EXPECT_EQ(r.consistency_terms, 1u);
  EXPECT_EQ(r.groups, 1u);
  EXPECT_EQ(r.triplets, (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_DOUBLE_EQ(r.l_total, r.l_sisdr + r.l_triplec);
  EXPECT_GT(r.l_triplec, 0.0);
  EXPECT_LE(r.grad_norm_clipped, 1.0);
  EXPECT_EQ(state.step, 1);

  const StageConfig cw{Stage::kFinetuneJoint,
                       TrainingMode::condition_wise(Condition::kTwoSpeaker), 50.0, 1};
  const data::Batch b{cw.mode, {{0, {Condition::kTwoSpeaker}}, {1, {Condition::kTwoSpeaker}}}};
  const auto rc = train_step(m, pool, b, cw, state, 1e-3, 1.0);
  EXPECT_EQ(rc.si_sdr_terms.size(), 2u);
  EXPECT_EQ(rc.consistency_terms, 0u);
  EXPECT_EQ(rc.l_triplec, 0.0);
}

TEST(TrainStep, MismatchedBatchIsModeError) {
  const auto pool = test::small_pool(3);
  model::LgtseModel m{test::small_model_config()};
  TrainerState state;
  state.optimizer = Adam(m.parameters());
  const StageConfig sc{Stage::kFinetuneJoint, TrainingMode::triplec(), 50.0, 1};
  expect_kind(ErrorKind::kMode, [&] { train_step(m, pool, parallel_batch(0), sc, state, 1e-3, 1.0); });
}

TEST(TrainStep, OverfitsOneTriplet) {
  auto pool = test::small_pool(3);
  pool.resize(1);
  model::LgtseModel m{test::small_model_config(model::InitMode::kIdentity)};
  TrainerState state;
  state.optimizer = Adam(m.parameters());
  const StageConfig sc{Stage::kFinetuneJoint, TrainingMode::triplec_parallel(), 50.0, 1};
  const double first = evaluate_batch(m, pool, parallel_batch(0), sc, nullptr).l_total;
  for (int k = 0; k < 200; ++k) train_step(m, pool, parallel_batch(0), sc, state, 2e-3, 1.0);
  const double last = evaluate_batch(m, pool, parallel_batch(0), sc, nullptr).l_total;
  EXPECT_LT(last, first);
  EXPECT_LT(last, first - 3.0);  // a clear drop, not rounding noise
}

TEST(TrainStep, NonFiniteLossSkipsThenAborts) {
  auto pool = test::small_pool(3);
  pool[1].y_single.samples[100] = std::numeric_limits<double>::quiet_NaN();
  model::LgtseModel m{test::small_model_config()};
  TrainerState state;
  state.optimizer = Adam(m.parameters());
  const StageConfig sc{Stage::kFinetuneJoint, TrainingMode::triplec_parallel(), 50.0, 1};
  const auto before = snapshot(m, ad::ParamGroup::kBackbone);
  auto r = train_step(m, pool, parallel_batch(1), sc, state, 1e-3, 1.0);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(state.consecutive_skips, 1);
  EXPECT_EQ(snapshot(m, ad::ParamGroup::kBackbone), before);
  r = train_step(m, pool, parallel_batch(0), sc, state, 1e-3, 1.0);
  EXPECT_FALSE(r.skipped);
  EXPECT_EQ(state.consecutive_skips, 0);
  train_step(m, pool, parallel_batch(1), sc, state, 1e-3, 1.0);
  train_step(m, pool, parallel_batch(1), sc, state, 1e-3, 1.0);
  expect_kind(ErrorKind::kTraining,
              [&] { train_step(m, pool, parallel_batch(1), sc, state, 1e-3, 1.0); });
}

TrainConfig tiny_config(TrainingMode mode, int pre, int fine) {
  TrainConfig c;
  c.model = test::small_model_config(model::InitMode::kIdentity, 5);
  c.stages = default_stages(mode, 50.0, pre, fine);
  c.batch_size = 3;
  c.seed = 17;
  return c;
}

std::vector<json> read_log(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

TEST(Config, JsonRoundTripAndValidation) {
  auto c = tiny_config(TrainingMode::condition_wise(Condition::kTwoSpeakerNoise), 1, 2);
  c.max_steps_per_stage = 5;
  const json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(json(back), j);
  EXPECT_EQ(back.stages.size(), 3u);
  EXPECT_EQ(back.stages[2].mode, TrainingMode::condition_wise(Condition::kTwoSpeakerNoise));
  EXPECT_EQ(c.batch_size_for(TrainingMode::shuffled()), 9u);
  EXPECT_EQ(c.batch_size_for(TrainingMode::triplec()), 3u);
  c.stages.clear();
  expect_kind(ErrorKind::kConfig, [&] { c.validate(); });
}

TEST(RunTraining, LogsScheduleAndCheckpoints) {
  test::TempDir dir;
  const auto pool = test::small_pool(3, data::Split::kTrain);
  const auto cfg = tiny_config(TrainingMode::triplec_parallel(), 1, 3);
  const auto res = run_training(cfg, pool, dir / "run");
  EXPECT_EQ(res.epochs.size(), 5u);
  EXPECT_TRUE(fs::exists(res.final_checkpoint / "manifest.json"));
  EXPECT_EQ(latest_checkpoint(dir / "run"), res.final_checkpoint);
  int epochs = 0, steps = 0;
  for (const auto& rec : read_log(res.log_path)) {
    EXPECT_DOUBLE_EQ(rec.at("lr").get<double>(), lr_at(rec.at("epoch"), cfg.schedule));
    if (rec.at("type") == "epoch") ++epochs;
    if (rec.at("type") == "step") {
      ++steps;
      EXPECT_LE(rec.at("grad_norm_clipped").get<double>(), 1.0);
      EXPECT_EQ(rec.at("conditions").size(), rec.at("triplets").size());
    }
  }
  EXPECT_EQ(epochs, 5);
  EXPECT_EQ(steps, 5 * 4);  // 12 training triplets, 3 per batch
  const auto m = load_checkpoint(res.final_checkpoint);
  EXPECT_EQ(m.parameter_count(), model::LgtseModel(cfg.model).parameter_count());
}

TEST(RunTraining, ConditionWiseDrawsOnlyItsCondition) {
  test::TempDir dir;
  const auto pool = test::small_pool(3, data::Split::kTrain);
  const auto cfg = tiny_config(TrainingMode::condition_wise(Condition::kTwoSpeakerNoise), 1, 1);
  const auto res = run_training(cfg, pool, dir / "run");
  int seen = 0;
  for (const auto& rec : read_log(res.log_path)) {
    if (rec.at("type") != "step") continue;
    for (const auto& c : rec.at("conditions")) {
      EXPECT_EQ(c.get<std::string>(), "2spk+noise");
      ++seen;
    }
  }
  EXPECT_EQ(seen, 3 * 12);
}

TEST(RunTraining, ResumeReproducesUninterruptedRun) {
  test::TempDir dir;
  const auto pool = test::small_pool(3, data::Split::kTrain);
  const auto cfg = tiny_config(TrainingMode::triplec_parallel(), 1, 2);
  const auto full = run_training(cfg, pool, dir / "full");

  RunOptions stop;
  stop.stop_after_epochs = 2;  // ends inside the backbone stage boundary
  run_training(cfg, pool, dir / "split", stop);
  RunOptions resume;
  resume.resume = true;
  const auto rest = run_training(cfg, pool, dir / "split", resume);
  EXPECT_EQ(rest.epochs.size(), 2u);

  const auto a = read_log(full.log_path), b = read_log(rest.log_path);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].at("type"), b[k].at("type"));
    const char* key = a[k].at("type") == "step" ? "l_total" : "mean_loss";
    EXPECT_NEAR(a[k].at(key).get<double>(), b[k].at(key).get<double>(), 1e-6) << k;
  }
  const auto ma = load_checkpoint(full.final_checkpoint), mb = load_checkpoint(rest.final_checkpoint);
  for (std::size_t i = 0; i < ma.parameters().size(); ++i) {
    EXPECT_LE((ma.parameters()[i].value - mb.parameters()[i].value).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RunTraining, ResumeWithChangedConfigIsConfigError) {
  test::TempDir dir;
  const auto pool = test::small_pool(3, data::Split::kTrain);
  auto cfg = tiny_config(TrainingMode::triplec_parallel(), 1, 1);
  RunOptions stop;
  stop.stop_after_epochs = 1;
  run_training(cfg, pool, dir / "run", stop);
  cfg.stages[2].w = 0.0;
  RunOptions resume;
  resume.resume = true;
  expect_kind(ErrorKind::kConfig, [&] { run_training(cfg, pool, dir / "run", resume); });
  expect_kind(ErrorKind::kIo, [&] { run_training(cfg, pool, dir / "empty", resume); });
}

TEST(RunTraining, UnwritableDirectoryIsIoError) {
  if (::geteuid() == 0) {
    // root ignores permission bits; use a path under a regular file instead.
    test::TempDir dir;
    std::ofstream(dir / "file") << "x";
    expect_kind(ErrorKind::kIo, [&] {
      run_training(tiny_config(TrainingMode::triplec_parallel(), 1, 1), test::small_pool(3),
                   dir / "file" / "run");
    });
    return;
  }
  test::TempDir dir;
  fs::create_directories(dir / "ro");
  ::chmod((dir / "ro").c_str(), 0500);
  expect_kind(ErrorKind::kIo, [&] {
    run_training(tiny_config(TrainingMode::triplec_parallel(), 1, 1), test::small_pool(3),
                 dir / "ro" / "run");
  });
  ::chmod((dir / "ro").c_str(), 0700);
}

TEST(RunTraining, MaxStepsCapsEachStage) {
  test::TempDir dir;
  const auto pool = test::small_pool(3, data::Split::kTrain);
  auto cfg = tiny_config(TrainingMode::triplec_parallel(), 2, 2);
  cfg.max_steps_per_stage = 3;
  const auto res = run_training(cfg, pool, dir / "run");
  int steps = 0;
  for (const auto& rec : read_log(res.log_path)) steps += rec.at("type") == "step";
  EXPECT_EQ(steps, 9);
}

}  // namespace
}  // namespace lgtse::training
