// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lgtse/autodiff/ops.hpp"
#include "lgtse/autodiff/tape.hpp"
#include "lgtse/signal/spectro.hpp"
#include "lgtse/signal/waveform.hpp"

namespace lgtse::model {

// How the backbone input combines mixture and guidance.
enum class FusionMode {
  kConcat,           // [mixture; guidance]
  kConcatMagnitude,  // [mixture; guidance; |mixture|; |guidance|]
};

// Which mixture representation the backbone sees and masks.
enum class BackboneInput { kNoisy, kDenoised };

// kIdentity zero-initializes both mask heads so an untrained model passes
// its input through; kRandom initializes them like every other layer.
enum class InitMode { kIdentity, kRandom };

struct DenoiserConfig {
  int hidden = 48;
  int kernel = 3;
};

struct BackboneConfig {
  int hidden = 64;
  int blocks = 2;
  int kernel = 3;
  FusionMode fusion = FusionMode::kConcatMagnitude;
  BackboneInput input = BackboneInput::kDenoised;
};

struct ModelConfig {
  signal::SpectroConfig spectro;
  DenoiserConfig denoiser;
  BackboneConfig backbone;
  double attn_scale = 1.0;  // multiplies the attention logits
  InitMode init = InitMode::kIdentity;
  std::uint64_t seed = 0;
  // Upper bound on the denoiser parameter count; 0 disables the check.
  std::size_t denoiser_budget = 60000;

  void validate() const;
};

// Which parameter groups receive gradients in a graph.
struct Trainable {
  bool denoiser = true;
  bool backbone = true;
  static Trainable none() { return {false, false}; }
};

// Attention-weighted enrollment: guidance = E * softmax_cols(scale * E^T Yd),
// where the softmax runs over enrollment frames. E is [2F x Te], Yd is
// [2F x Ty]; returns [2F x Ty]. `attention` receives the [Te x Ty] weights.
Eigen::MatrixXd context_interaction(const Eigen::MatrixXd& enrollment,
                                    const Eigen::MatrixXd& denoised,
                                    double attn_scale = 1.0,
                                    Eigen::MatrixXd* attention = nullptr);
ad::Var context_interaction(ad::Var enrollment, ad::Var denoised,
                            double attn_scale, ad::Var* attention = nullptr);

// Nodes of one forward evaluation, all in the compressed domain except the
// final waveform.
struct ForwardGraph {
  ad::Var mixture;     // Y = compress(stft(y))
  ad::Var denoised;    // Y_d
  ad::Var enrollment;  // E = compress(stft(e))
  ad::Var attention;   // softmax weights [Te x Ty]
  ad::Var guidance;    // E_{Y_d}
  ad::Var estimate_spec;
  ad::Var estimate;    // waveform column [len(y) x 1]
};

class LgtseModel {
 public:
  explicit LgtseModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const signal::SpectroConfig& spectro() const { return config_.spectro; }
  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  std::size_t parameter_count(ad::ParamGroup g) const {
    return params_.scalar_count(g);
  }

  // compress(stft(w)) for a waveform at the model rate.
  Eigen::MatrixXd compressed_spectrum(const Waveform& w) const;

  ad::Var denoise(ad::Tape& tape, ad::Var mixture, Trainable tr) const;
  // Returns the masked (compressed) estimate of the target.
  ad::Var backbone(ad::Tape& tape, ad::Var mixture, ad::Var guidance,
                   Trainable tr) const;

  ForwardGraph build(ad::Tape& tape, const Waveform& y,
                     const Eigen::MatrixXd& enrollment, Trainable tr) const;
  // y -> denoiser -> expand -> istft, used to pretrain the front-end.
  ad::Var build_denoiser(ad::Tape& tape, const Waveform& y, Trainable tr) const;

  // Inference.
  signal::ComplexSpectrogram denoise(const signal::ComplexSpectrogram& y) const;
  Waveform forward(const Waveform& y, const Waveform& e) const;
  // Same result as forward() per mixture; mixtures must share length and
  // sample rate. Items run concurrently.
  std::vector<Waveform> parallel_forward(std::span<const Waveform> ys,
                                         const Waveform& e) const;
  // Front-end only: istft(expand(denoise(compress(stft(y))))).
  Waveform denoise_waveform(const Waveform& y) const;

 private:
  struct Layer {
    std::size_t weight;
    std::size_t bias;
  };
  struct Gru {
    std::size_t wx, wh, bx, bh;
  };
  struct Block {
    Layer conv;
    Gru gru;
  };

  void check_input(const Waveform& w, const char* what) const;

  ModelConfig config_;
  ad::ParameterStore params_;
  // Denoiser.
  Layer dn_in_{}, dn_conv_{}, dn_out_{};
  Gru dn_gru_{};
  // Backbone.
  Layer bb_in_{}, bb_out_{};
  std::vector<Block> bb_blocks_;
};

}  // namespace lgtse::model
