// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "lgtse/data/data.hpp"
#include "lgtse/model/lgtse_model.hpp"

namespace lgtse::test {

// A few thousand parameters on 8 ms frames: cheap enough for exhaustive
// finite differences.
inline model::ModelConfig small_model_config(model::InitMode init = model::InitMode::kRandom,
                                             std::uint64_t seed = 1) {
  model::ModelConfig c;
  c.spectro.win_ms = 8.0;
  c.spectro.hop_ms = 2.0;
  c.denoiser.hidden = 4;
  c.backbone.hidden = 4;
  c.backbone.blocks = 1;
  c.init = init;
  c.seed = seed;
  return c;
}

inline data::SynthConfig small_corpus_config(std::uint64_t seed = 3) {
  data::SynthConfig c;
  c.n_speakers = 3;
  c.utts_per_speaker = 6;
  c.duration_s = 0.5;
  c.seed = seed;
  return c;
}

inline std::vector<data::ConditionTriplet> small_pool(std::uint64_t seed = 3,
                                                      data::Split split = data::Split::kAll,
                                                      double enroll_s = 0.5) {
  data::PoolConfig p;
  p.seed = seed + 100;
  p.enroll_s = enroll_s;
  p.heldout_utts = 2;
  return data::build_pool(data::synth_corpus(small_corpus_config(seed)), p, split);
}

}  // namespace lgtse::test
