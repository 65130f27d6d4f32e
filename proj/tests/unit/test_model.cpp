// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "lgtse/common/error.hpp"
#include "lgtse/model/lgtse_model.hpp"
#include "lgtse/model/serialize.hpp"
#include "lgtse/training/training.hpp"
#include "support/fixtures.hpp"
#include "support/test_support.hpp"

namespace lgtse::model {
namespace {

using test::random_matrix;
using test::random_wave;

double max_abs_diff(const Waveform& a, const Waveform& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.samples[i] - b.samples[i]));
  return m;
}

double rel_l2(const Waveform& a, const Waveform& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
    den += b.samples[i] * b.samples[i];
  }
  return std::sqrt(num / den);
}

TEST(ContextInteraction, ShapesAndColumnSums) {
  const auto e = random_matrix(10, 5, 1), yd = random_matrix(10, 7, 2);
  Eigen::MatrixXd att;
  const auto out = context_interaction(e, yd, 1.0, &att);
  EXPECT_EQ(att.rows(), 5);
  EXPECT_EQ(att.cols(), 7);
  EXPECT_EQ(out.rows(), 10);
  EXPECT_EQ(out.cols(), 7);
  for (long t = 0; t < att.cols(); ++t) {
    EXPECT_NEAR(att.col(t).sum(), 1.0, 1e-6);
    EXPECT_GE(att.col(t).minCoeff(), 0.0);
    EXPECT_LE(att.col(t).maxCoeff(), 1.0);
  }
  // Direct evaluation of E * softmax(E^T Yd).
  const Eigen::MatrixXd logits = e.transpose() * yd;
  Eigen::MatrixXd p = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp();
  p = p.array().rowwise() / p.colwise().sum().array();
  EXPECT_LE((out - e * p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ContextInteraction, SingleEnrollmentFrameBroadcasts) {
  const auto e = random_matrix(12, 1, 3), yd = random_matrix(12, 9, 4, 5.0);
  Eigen::MatrixXd att;
  const auto out = context_interaction(e, yd, 1.0, &att);
  EXPECT_EQ(att, Eigen::MatrixXd::Ones(1, 9));
  for (long t = 0; t < 9; ++t) EXPECT_EQ(out.col(t), e.col(0));
}

TEST(ContextInteraction, FrequencyMismatchIsShapeError) {
  try {
    context_interaction(random_matrix(10, 5, 1), random_matrix(12, 7, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(ContextInteraction, AttnScaleMultipliesLogits) {
  const auto e = random_matrix(6, 4, 5), yd = random_matrix(6, 3, 6);
  EXPECT_LE((context_interaction(e, yd, 2.0) - context_interaction(2.0 * e, yd, 1.0) / 2.0)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Model, ConfigValidation) {
  ModelConfig c;
  c.backbone.hidden = 0;
  EXPECT_THROW(LgtseModel{c}, Error);
  ModelConfig d;
  d.denoiser.hidden = 200;  // far above the default budget
  try {
    LgtseModel m(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Model, DefaultSizes) {
  const LgtseModel m{ModelConfig{}};
  const auto dn = m.parameter_count(ad::ParamGroup::kDenoiser);
  const auto bb = m.parameter_count(ad::ParamGroup::kBackbone);
  EXPECT_LE(dn, 60000u);
  EXPECT_GE(dn, 30000u);
  EXPECT_GE(bb, 100000u);
  EXPECT_LE(bb, 500000u);
  EXPECT_EQ(m.parameter_count(), dn + bb);
}

TEST(Denoise, ZeroInputGivesZeroOutputAndKeepsShape) {
  const LgtseModel m{test::small_model_config()};
  const auto& cfg = m.spectro();
  signal::ComplexSpectrogram z{Eigen::MatrixXd::Zero(2 * cfg.bins(), 20), cfg.bins(), cfg};
  const auto d = m.denoise(z);
  EXPECT_EQ(d.data.rows(), z.data.rows());
  EXPECT_EQ(d.data.cols(), z.data.cols());
  EXPECT_LE(d.data.cwiseAbs().maxCoeff(), 1e-12);

  const auto y = signal::drc_compress(signal::stft(random_wave(3000, 1), cfg), cfg.beta);
  const auto dy = m.denoise(y);
  EXPECT_EQ(dy.data.rows(), y.data.rows());
  EXPECT_EQ(dy.data.cols(), y.data.cols());
}

TEST(Forward, IdentityInitPassesThrough) {
  const LgtseModel m{ModelConfig{}};
  const auto y = random_wave(8000, 2), e = random_wave(8000, 3);
  const auto out = m.forward(y, e);
  const auto dn = m.denoise_waveform(y);
  EXPECT_LE(max_abs_diff(out, dn), 1e-12);
  // Interior samples: istft(expand(compress(stft(y)))) = y.
  const Waveform inner_out(std::vector<double>(out.samples.begin() + 256, out.samples.end() - 256),
                           8000);
  const Waveform inner_y(std::vector<double>(y.samples.begin() + 256, y.samples.end() - 256), 8000);
  EXPECT_LE(rel_l2(inner_out, inner_y), 1e-6);
}

TEST(Forward, OutputLengthMatchesInput) {
  const LgtseModel m{test::small_model_config()};
  const auto e = random_wave(8000, 4);
  for (double secs : {1.0, 1.37, 2.0}) {
    const auto n = static_cast<std::size_t>(std::lround(secs * 8000));
    EXPECT_EQ(m.forward(random_wave(n, 5), e).size(), n) << secs;
  }
}

TEST(Forward, RateMismatchIsConfigError) {
  const LgtseModel m{test::small_model_config()};
  for (auto [y, e] : {std::pair{random_wave(4000, 1, 16000), random_wave(4000, 2)},
                      std::pair{random_wave(4000, 1), random_wave(4000, 2, 16000)}}) {
    try {
      m.forward(y, e);
      FAIL();
    } catch (const Error& err) {
      EXPECT_EQ(err.kind(), ErrorKind::kConfig);
    }
  }
}

TEST(Forward, DeterministicAndSeedSensitive) {
  const LgtseModel a{test::small_model_config(InitMode::kRandom, 7)};
  const LgtseModel b{test::small_model_config(InitMode::kRandom, 7)};
  const LgtseModel c{test::small_model_config(InitMode::kRandom, 8)};
  const auto y = random_wave(4000, 6), e = random_wave(4000, 7);
  const auto out = a.forward(y, e);
  EXPECT_EQ(out.samples, a.forward(y, e).samples);
  EXPECT_EQ(out.samples, b.forward(y, e).samples);
  EXPECT_NE(out.samples, c.forward(y, e).samples);
}

TEST(Forward, EveryParameterGroupReceivesGradient) {
  for (auto fusion : {FusionMode::kConcat, FusionMode::kConcatMagnitude}) {
    for (auto input : {BackboneInput::kNoisy, BackboneInput::kDenoised}) {
      auto cfg = test::small_model_config();
      cfg.backbone.fusion = fusion;
      cfg.backbone.input = input;
      const LgtseModel m{cfg};
      const auto y = random_wave(2000, 8), e = random_wave(2000, 9);
      ad::Tape tape;
      const auto g = m.build(tape, y, m.compressed_spectrum(e), Trainable{});
      const auto obj = ad::squared_norm(g.estimate);
      tape.backward(obj, Eigen::MatrixXd::Ones(1, 1));
      auto grads = m.parameters().zeros();
      tape.collect(grads);
      double dn = 0.0, bb = 0.0;
      for (std::size_t i = 0; i < grads.size(); ++i) {
        const double s = grads[i].squaredNorm();
        EXPECT_TRUE(grads[i].allFinite());
        (m.parameters()[i].group == ad::ParamGroup::kDenoiser ? dn : bb) += s;
      }
      EXPECT_GT(dn, 0.0);
      EXPECT_GT(bb, 0.0);
    }
  }
}

TEST(Forward, FrozenGroupsGetNoGradient) {
  const LgtseModel m{test::small_model_config()};
  const auto y = random_wave(2000, 8), e = random_wave(2000, 9);
  ad::Tape tape;
  const auto g = m.build(tape, y, m.compressed_spectrum(e), Trainable{false, true});
  tape.backward(ad::squared_norm(g.estimate), Eigen::MatrixXd::Ones(1, 1));
  auto grads = m.parameters().zeros();
  tape.collect(grads);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (m.parameters()[i].group == ad::ParamGroup::kDenoiser) {
      EXPECT_EQ(grads[i].squaredNorm(), 0.0);
    }
  }
}

TEST(ParallelForward, MatchesPerItemForward) {
  const LgtseModel m{test::small_model_config()};
  const auto e = random_wave(4000, 10);
  const std::vector<Waveform> ys = {random_wave(3000, 11), random_wave(3000, 12),
                                    random_wave(3000, 13)};
  const auto one = m.parallel_forward(std::span(ys).first(1), e);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].samples, m.forward(ys[0], e).samples);

  const auto all = m.parallel_forward(ys, e);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    EXPECT_LE(rel_l2(all[i], m.forward(ys[i], e)), 1e-5);
  }
  const std::vector<Waveform> perm = {ys[2], ys[0], ys[1]};
  const auto p = m.parallel_forward(perm, e);
  EXPECT_EQ(p[0].samples, all[2].samples);
  EXPECT_EQ(p[1].samples, all[0].samples);
  EXPECT_EQ(p[2].samples, all[1].samples);
}

TEST(ParallelForward, ItemsAreIndependent) {
  const LgtseModel m{test::small_model_config()};
  const auto e = random_wave(4000, 14);
  std::vector<Waveform> ys = {random_wave(3000, 15), random_wave(3000, 16)};
  const auto before = m.parallel_forward(ys, e);
  for (double& x : ys[1].samples) x *= -3.0;
  const auto after = m.parallel_forward(ys, e);
  EXPECT_EQ(before[0].samples, after[0].samples);
  EXPECT_NE(before[1].samples, after[1].samples);
}

TEST(ParallelForward, HeterogeneousLengthsAreShapeError) {
  const LgtseModel m{test::small_model_config()};
  const std::vector<Waveform> ys = {random_wave(3000, 1), random_wave(3001, 2)};
  try {
    m.parallel_forward(ys, random_wave(3000, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

// d(total loss)/d(theta) against central differences on every parameter of a
// small random-init model, triplec-parallel batch of one group.
TEST(Gradients, TotalLossMatchesFiniteDifferences) {
  LgtseModel m{test::small_model_config(InitMode::kRandom, 21)};
  ASSERT_LE(m.parameter_count(), 10000u);
  auto pool = test::small_pool(5);
  pool.resize(1);
  const data::Batch batch{TrainingMode::triplec_parallel(), {{0, {kAllConditions.begin(),
                                                                  kAllConditions.end()}}}};
  const training::StageConfig stage{training::Stage::kFinetuneJoint,
                                    TrainingMode::triplec_parallel(), 50.0, 1};
  auto grads = m.parameters().zeros();
  training::evaluate_batch(m, pool, batch, stage, &grads);
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t p = 0; p < m.parameters().size(); ++p) {
    auto& v = m.parameters()[p].value;
    for (long i = 0; i < v.size(); i += 3) {
      const double x0 = v(i);
      v(i) = x0 + h;
      const double lp = training::evaluate_batch(m, pool, batch, stage, nullptr).l_total;
      v(i) = x0 - h;
      const double lm = training::evaluate_batch(m, pool, batch, stage, nullptr).l_total;
      v(i) = x0;
      const double fd = (lp - lm) / (2 * h);
      EXPECT_LE(test::rel_err(grads[p](i), fd, 1e-3), 1e-4)
          << m.parameters()[p].name << "[" << i << "]: " << grads[p](i) << " vs " << fd;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Checkpoint, RoundTrip) {
  test::TempDir dir;
  auto cfg = test::small_model_config(InitMode::kRandom, 31);
  cfg.attn_scale = 0.5;
  cfg.backbone.fusion = FusionMode::kConcat;
  const LgtseModel m{cfg};
  save_model(m, dir / "ck", {{"stage", "finetune"}});
  const LgtseModel back = load_model(dir / "ck");
  EXPECT_EQ(back.config().attn_scale, 0.5);
  EXPECT_EQ(back.config().backbone.fusion, FusionMode::kConcat);
  EXPECT_EQ(back.config().spectro, cfg.spectro);
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(back.parameters()[i].name, m.parameters()[i].name);
    EXPECT_EQ(back.parameters()[i].value, m.parameters()[i].value);
  }
  const auto y = random_wave(2000, 1), e = random_wave(2000, 2);
  EXPECT_EQ(back.forward(y, e).samples, m.forward(y, e).samples);
}

TEST(Checkpoint, CorruptArraysAreIoError) {
  test::TempDir dir;
  const LgtseModel m{test::small_model_config()};
  save_model(m, dir / "ck");
  std::filesystem::resize_file(dir / "ck" / "params.bin", 100);
  try {
    load_model(dir / "ck");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
  try {
    load_model(dir / "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace lgtse::model
