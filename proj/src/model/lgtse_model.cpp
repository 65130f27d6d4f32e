// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/model/lgtse_model.hpp"

#include <cmath>
#include <random>

#include "lgtse/common/error.hpp"
#include "lgtse/common/parallel.hpp"
#include "lgtse/kernels/nn.hpp"

namespace lgtse::model {

using ad::Matrix;
using ad::ParamGroup;
using ad::Tape;
using ad::Var;

namespace {

Matrix uniform(std::mt19937_64& rng, long rows, long cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (long j = 0; j < cols; ++j) {
    for (long i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

double xavier(long fan_in, long fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Waveform to_waveform(const Matrix& column, int rate) {
  return Waveform(std::vector<double>(column.data(),
                                      column.data() + column.size()),
                  rate);
}

}  // namespace

void ModelConfig::validate() const {
  spectro.validate();
  require(denoiser.hidden >= 1 && denoiser.kernel >= 1, ErrorKind::kConfig,
          "denoiser hidden/kernel must be >= 1");
  require(backbone.hidden >= 1 && backbone.kernel >= 1 && backbone.blocks >= 0,
          ErrorKind::kConfig, "backbone hidden/kernel/blocks out of range");
  require(std::isfinite(attn_scale), ErrorKind::kConfig,
          "attn_scale must be finite");
}

Eigen::MatrixXd context_interaction(const Eigen::MatrixXd& enrollment,
                                    const Eigen::MatrixXd& denoised,
                                    double attn_scale,
                                    Eigen::MatrixXd* attention) {
  require(enrollment.rows() == denoised.rows(), ErrorKind::kShape,
          "enrollment and mixture must share the frequency dimension");
  const Eigen::MatrixXd logits =
      attn_scale * (enrollment.transpose() * denoised);
  Eigen::MatrixXd weights = kernels::omp::softmax_cols(logits);
  Eigen::MatrixXd out = enrollment * weights;
  if (attention) *attention = std::move(weights);
  return out;
}

Var context_interaction(Var enrollment, Var denoised, double attn_scale,
                        Var* attention) {
  require(enrollment.rows() == denoised.rows(), ErrorKind::kShape,
          "enrollment and mixture must share the frequency dimension");
  Var logits = ad::matmul_tn(enrollment, denoised);
  if (attn_scale != 1.0) logits = ad::scale(logits, attn_scale);
  Var weights = ad::softmax_cols(logits);
  if (attention) *attention = weights;
  return ad::matmul(enrollment, weights);
}

LgtseModel::LgtseModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const long f = config_.spectro.bins();
  const bool random_heads = config_.init == InitMode::kRandom;

  auto add_linear = [&](const std::string& name, ParamGroup g, long in,
                        long out, bool head) {
    Layer l;
    Matrix w = head && !random_heads ? Matrix::Zero(out, in)
                                     : uniform(rng, out, in, xavier(in, out));
    l.weight = params_.add(name + ".weight", g, std::move(w));
    l.bias = params_.add(name + ".bias", g, Matrix::Zero(out, 1));
    return l;
  };
  auto add_conv = [&](const std::string& name, ParamGroup g, long ch,
                      int kernel) {
    Layer l;
    l.weight = params_.add(name + ".weight", g,
                           uniform(rng, ch, ch * kernel,
                                   xavier(ch * kernel, ch)));
    l.bias = params_.add(name + ".bias", g, Matrix::Zero(ch, 1));
    return l;
  };
  auto add_gru = [&](const std::string& name, ParamGroup g, long in, long h) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    Gru r;
    r.wx = params_.add(name + ".wx", g, uniform(rng, 3 * h, in, bound));
    r.wh = params_.add(name + ".wh", g, uniform(rng, 3 * h, h, bound));
    r.bx = params_.add(name + ".bx", g, Matrix::Zero(3 * h, 1));
    r.bh = params_.add(name + ".bh", g, Matrix::Zero(3 * h, 1));
    return r;
  };

  const long dh = config_.denoiser.hidden;
  dn_in_ = add_linear("denoiser.in", ParamGroup::kDenoiser, 3 * f, dh, false);
  dn_conv_ = add_conv("denoiser.conv", ParamGroup::kDenoiser, dh,
                      config_.denoiser.kernel);
  dn_gru_ = add_gru("denoiser.gru", ParamGroup::kDenoiser, dh, dh);
  dn_out_ = add_linear("denoiser.mask", ParamGroup::kDenoiser, dh, 2 * f, true);

  const long bh = config_.backbone.hidden;
  const long in_rows =
      config_.backbone.fusion == FusionMode::kConcatMagnitude ? 6 * f : 4 * f;
  bb_in_ = add_linear("backbone.in", ParamGroup::kBackbone, in_rows, bh, false);
  for (int b = 0; b < config_.backbone.blocks; ++b) {
    const std::string prefix = "backbone.block" + std::to_string(b);
    Block blk;
    blk.conv = add_conv(prefix + ".conv", ParamGroup::kBackbone, bh,
                        config_.backbone.kernel);
    blk.gru = add_gru(prefix + ".gru", ParamGroup::kBackbone, bh, bh);
    bb_blocks_.push_back(blk);
  }
  bb_out_ = add_linear("backbone.mask", ParamGroup::kBackbone, bh, 2 * f, true);

  if (config_.denoiser_budget > 0) {
    require(parameter_count(ParamGroup::kDenoiser) <= config_.denoiser_budget,
            ErrorKind::kConfig,
            "denoiser has " +
                std::to_string(parameter_count(ParamGroup::kDenoiser)) +
                " parameters, above the configured budget of " +
                std::to_string(config_.denoiser_budget));
  }
}

void LgtseModel::check_input(const Waveform& w, const char* what) const {
  require(w.sample_rate == config_.spectro.sample_rate, ErrorKind::kConfig,
          std::string(what) + " sample rate " + std::to_string(w.sample_rate) +
              " does not match model rate " +
              std::to_string(config_.spectro.sample_rate));
}

Eigen::MatrixXd LgtseModel::compressed_spectrum(const Waveform& w) const {
  check_input(w, "input");
  return signal::magnitude_power(signal::stft_matrix(w.samples, spectro()),
                                 spectro().beta);
}

Var LgtseModel::denoise(Tape& tape, Var mixture, Trainable tr) const {
  auto p = [&](std::size_t i) {
    return tape.parameter(params_, i, tr.denoiser);
  };
  const int k = config_.denoiser.kernel;
  Var feat = ad::concat_rows({mixture, ad::complex_abs(mixture)});
  Var h = ad::tanh(ad::linear(p(dn_in_.weight), feat, p(dn_in_.bias)));
  h = ad::add(h, ad::tanh(ad::conv1d_causal(p(dn_conv_.weight), h,
                                            p(dn_conv_.bias), k, 1)));
  h = ad::add(h, ad::gru(h, p(dn_gru_.wx), p(dn_gru_.wh), p(dn_gru_.bx),
                         p(dn_gru_.bh)));
  Var delta = ad::linear(p(dn_out_.weight), h, p(dn_out_.bias));
  return ad::add(mixture, ad::complex_mul(delta, mixture));
}

Var LgtseModel::backbone(Tape& tape, Var mixture, Var guidance,
                         Trainable tr) const {
  auto p = [&](std::size_t i) {
    return tape.parameter(params_, i, tr.backbone);
  };
  std::vector<Var> parts = {mixture, guidance};
  if (config_.backbone.fusion == FusionMode::kConcatMagnitude) {
    parts.push_back(ad::complex_abs(mixture));
    parts.push_back(ad::complex_abs(guidance));
  }
  Var x = ad::tanh(ad::linear(p(bb_in_.weight), ad::concat_rows(parts),
                              p(bb_in_.bias)));
  const int k = config_.backbone.kernel;
  int dilation = 1;
  for (const Block& blk : bb_blocks_) {
    x = ad::add(x, ad::tanh(ad::conv1d_causal(p(blk.conv.weight), x,
                                              p(blk.conv.bias), k, dilation)));
    x = ad::add(x, ad::gru(x, p(blk.gru.wx), p(blk.gru.wh), p(blk.gru.bx),
                           p(blk.gru.bh)));
    dilation *= 2;
  }
  Var delta = ad::linear(p(bb_out_.weight), x, p(bb_out_.bias));
  return ad::add(mixture, ad::complex_mul(delta, mixture));
}

ForwardGraph LgtseModel::build(Tape& tape, const Waveform& y,
                               const Eigen::MatrixXd& enrollment,
                               Trainable tr) const {
  check_input(y, "mixture");
  require(enrollment.rows() == 2 * spectro().bins(), ErrorKind::kShape,
          "enrollment spectrum has the wrong bin count");
  ForwardGraph g;
  g.mixture = tape.constant(compressed_spectrum(y));
  g.denoised = denoise(tape, g.mixture, tr);
  g.enrollment = tape.constant(enrollment);
  g.guidance = context_interaction(g.enrollment, g.denoised,
                                   config_.attn_scale, &g.attention);
  Var mix = config_.backbone.input == BackboneInput::kDenoised ? g.denoised
                                                                : g.mixture;
  g.estimate_spec = backbone(tape, mix, g.guidance, tr);
  Var linear_spec = ad::magnitude_power(g.estimate_spec, 1.0 / spectro().beta);
  g.estimate = ad::istft(linear_spec, spectro(), y.size());
  return g;
}

Var LgtseModel::build_denoiser(Tape& tape, const Waveform& y,
                               Trainable tr) const {
  check_input(y, "mixture");
  Var mixture = tape.constant(compressed_spectrum(y));
  Var denoised = denoise(tape, mixture, tr);
  return ad::istft(ad::magnitude_power(denoised, 1.0 / spectro().beta),
                   spectro(), y.size());
}

signal::ComplexSpectrogram LgtseModel::denoise(
    const signal::ComplexSpectrogram& y) const {
  require(y.bins == spectro().bins() &&
              y.data.rows() == 2 * spectro().bins(),
          ErrorKind::kShape, "spectrogram geometry does not match the model");
  Tape tape;
  Var out = denoise(tape, tape.constant(y.data), Trainable::none());
  return signal::ComplexSpectrogram{out.value(), y.bins, y.config};
}

Waveform LgtseModel::forward(const Waveform& y, const Waveform& e) const {
  check_input(e, "enrollment");
  Tape tape;
  ForwardGraph g = build(tape, y, compressed_spectrum(e), Trainable::none());
  return to_waveform(g.estimate.value(), y.sample_rate);
}

std::vector<Waveform> LgtseModel::parallel_forward(
    std::span<const Waveform> ys, const Waveform& e) const {
  for (const auto& y : ys) {
    check_input(y, "mixture");
    require(y.size() == ys.front().size(), ErrorKind::kShape,
            "parallel_forward needs equal-length mixtures");
  }
  check_input(e, "enrollment");
  const Eigen::MatrixXd enroll = compressed_spectrum(e);
  std::vector<Waveform> out(ys.size());
  const long n = static_cast<long>(ys.size());
  parallel_for(n, [&](long i) {
    Tape tape;
    ForwardGraph g = build(tape, ys[i], enroll, Trainable::none());
    out[i] = to_waveform(g.estimate.value(), ys[i].sample_rate);
  });
  return out;
}

Waveform LgtseModel::denoise_waveform(const Waveform& y) const {
  Tape tape;
  Var w = build_denoiser(tape, y, Trainable::none());
  return to_waveform(w.value(), y.sample_rate);
}

}  // namespace lgtse::model
