// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <random>

#include "lgtse/common/error.hpp"
#include "lgtse/common/seed.hpp"
#include "lgtse/data/data.hpp"

namespace lgtse::data {

namespace {

double prefix_energy(const Waveform& w, std::size_t n) {
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) e += w.samples[i] * w.samples[i];
  return e;
}

// Gain that puts b's first n samples at gain_db relative to a's.
double relative_gain(const Waveform& a, const Waveform& b, std::size_t n,
                     double gain_db) {
  if (gain_db == kDisabledDb) return 0.0;
  require(!std::isnan(gain_db) && gain_db != -kDisabledDb, ErrorKind::kDomain,
          "mixing gain must be finite or -inf");
  const double eb = prefix_energy(b, n);
  if (eb <= 0.0) return 0.0;
  const double ea = prefix_energy(a, n);
  require(ea > 0.0, ErrorKind::kDomain,
          "cannot set a relative level against a silent signal");
  return std::sqrt(ea / eb * std::pow(10.0, gain_db / 10.0));
}

bool eligible(const ConditionTriplet& t, const TrainingMode& mode) {
  using Kind = TrainingMode::Kind;
  switch (mode.kind) {
    case Kind::kConditionWise:
      return t.has(mode.condition);
    case Kind::kShuffled:
      return t.has(Condition::kSingleNoise) || t.has(Condition::kTwoSpeaker) ||
             t.has(Condition::kTwoSpeakerNoise);
    case Kind::kTripleC:
      return t.has(Condition::kSingleNoise) &&
             t.has(Condition::kTwoSpeakerNoise);
    case Kind::kTripleCParallel:
      return t.complete();
  }
  return false;
}

std::vector<Condition> group_conditions(const TrainingMode& mode) {
  using Kind = TrainingMode::Kind;
  switch (mode.kind) {
    case Kind::kConditionWise:
      return {mode.condition};
    case Kind::kTripleC:
      return {Condition::kSingleNoise, Condition::kTwoSpeakerNoise};
    case Kind::kTripleCParallel:
      return {kAllConditions.begin(), kAllConditions.end()};
    case Kind::kShuffled:
      break;
  }
  return {};
}

std::vector<Condition> present(const ConditionTriplet& t) {
  std::vector<Condition> out;
  for (Condition c : kAllConditions) {
    if (t.has(c)) out.push_back(c);
  }
  return out;
}

}  // namespace

Waveform mix_min(const Waveform& a, const Waveform& b, double gain_db) {
  require(!a.empty() && !b.empty(), ErrorKind::kLength,
          "mix_min of an empty signal");
  require(a.sample_rate == b.sample_rate, ErrorKind::kConfig,
          "mix_min inputs differ in sample rate");
  const std::size_t n = std::min(a.size(), b.size());
  const double g = relative_gain(a, b, n, gain_db);
  Waveform out = a.truncated(n);
  if (g != 0.0) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] += g * b.samples[i];
  }
  return out;
}

const Waveform& ConditionTriplet::mixture(Condition c) const {
  switch (c) {
    case Condition::kSingleNoise:
      return y_single;
    case Condition::kTwoSpeaker:
      return y_clean2;
    case Condition::kTwoSpeakerNoise:
      return y_both;
  }
  return y_both;
}

Waveform& ConditionTriplet::mixture(Condition c) {
  return const_cast<Waveform&>(std::as_const(*this).mixture(c));
}

bool ConditionTriplet::complete() const {
  return has(Condition::kSingleNoise) && has(Condition::kTwoSpeaker) &&
         has(Condition::kTwoSpeakerNoise);
}

void ConditionTriplet::validate(double construction_tol) const {
  require(!target.empty() && !enrollment.empty(), ErrorKind::kValidation,
          "triplet lacks target or enrollment");
  require(has(Condition::kSingleNoise) || has(Condition::kTwoSpeaker) ||
              has(Condition::kTwoSpeakerNoise),
          ErrorKind::kValidation, "triplet has no mixtures");
  target.validate();
  enrollment.validate();
  const int rate = target.sample_rate;
  require(enrollment.sample_rate == rate, ErrorKind::kValidation,
          "enrollment sample rate differs from target");
  for (Condition c : kAllConditions) {
    if (!has(c)) continue;
    const Waveform& y = mixture(c);
    y.validate();
    require(y.sample_rate == rate, ErrorKind::kValidation,
            std::string(label(c)) + " mixture sample rate differs");
    require(y.size() == target.size(), ErrorKind::kValidation,
            std::string(label(c)) + " mixture length differs from target");
  }
  require(speaker_id.empty() || speaker_id != interferer_id,
          ErrorKind::kValidation, "interferer equals target speaker");
  for (int u : enrollment_utts) {
    require(u != target_utt, ErrorKind::kValidation,
            "enrollment reuses the target utterance");
  }
  if (complete()) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double d = y_both.samples[i] - y_clean2.samples[i] -
                       (y_single.samples[i] - target.samples[i]);
      require(std::abs(d) <= construction_tol, ErrorKind::kValidation,
              "2spk+noise differs from 2spk plus the shared noise");
    }
  }
}

ConditionTriplet make_triplet(const SourceClip& target,
                              const std::vector<const SourceClip*>& enrollment,
                              const SourceClip& interferer,
                              const SourceClip& noise, double sir_db,
                              double snr_db) {
  require(target.kind == ClipKind::kSpeech &&
              interferer.kind == ClipKind::kSpeech &&
              noise.kind == ClipKind::kNoise,
          ErrorKind::kValidation, "clip kinds do not match their roles");
  require(target.speaker_id != interferer.speaker_id, ErrorKind::kValidation,
          "interferer " + interferer.speaker_id + " is the target speaker");
  require(!enrollment.empty(), ErrorKind::kValidation, "no enrollment clips");

  ConditionTriplet t;
  t.speaker_id = target.speaker_id;
  t.interferer_id = interferer.speaker_id;
  t.target_utt = target.utterance;
  t.sir_db = sir_db;
  t.snr_db = snr_db;
  const int rate = target.waveform.sample_rate;
  std::vector<double> e;
  for (const SourceClip* c : enrollment) {
    require(c->speaker_id == target.speaker_id, ErrorKind::kValidation,
            "enrollment speaker differs from target speaker");
    require(c->utterance != target.utterance, ErrorKind::kValidation,
            "enrollment reuses the target utterance");
    require(c->waveform.sample_rate == rate, ErrorKind::kConfig,
            "enrollment sample rate differs");
    e.insert(e.end(), c->waveform.samples.begin(), c->waveform.samples.end());
    t.enrollment_utts.push_back(c->utterance);
  }
  t.enrollment = Waveform(std::move(e), rate);

  const std::size_t n = std::min(
      {target.waveform.size(), interferer.waveform.size(), noise.waveform.size()});
  require(n > 0, ErrorKind::kLength, "empty source clip");
  t.target = target.waveform.truncated(n);
  const Waveform i = interferer.waveform.truncated(n);
  const Waveform v = noise.waveform.truncated(n);
  // Target-over-component ratios become component-over-target levels.
  t.y_single = mix_min(t.target, v, -snr_db);
  t.y_clean2 = mix_min(t.target, i, -sir_db);
  t.y_both = t.y_clean2;
  for (std::size_t k = 0; k < n; ++k) {
    t.y_both.samples[k] += t.y_single.samples[k] - t.target.samples[k];
  }
  return t;
}

void PoolConfig::validate() const {
  require(enroll_s > 0.0 && heldout_utts >= 0, ErrorKind::kConfig,
          "enroll_s must be > 0 and heldout_utts >= 0");
  require(sir_min_db <= sir_max_db && snr_min_db <= snr_max_db,
          ErrorKind::kConfig, "mixing ranges are inverted");
}

std::vector<ConditionTriplet> build_pool(const Corpus& corpus,
                                         const PoolConfig& cfg, Split split) {
  cfg.validate();
  const SynthConfig& sc = corpus.config;
  const int utts = sc.utts_per_speaker;
  require(cfg.heldout_utts < utts, ErrorKind::kConfig,
          "heldout_utts leaves no training utterances");
  require(!corpus.noise.empty(), ErrorKind::kCapacity, "corpus has no noise");

  int u_begin = 0, u_end = utts;
  const int n_noise = static_cast<int>(corpus.noise.size());
  int n_begin = 0, n_end = n_noise;
  if (split != Split::kAll && cfg.heldout_utts > 0) {
    const int held_noise = std::clamp(
        static_cast<int>(std::lround(static_cast<double>(n_noise) *
                                     cfg.heldout_utts / utts)),
        1, std::max(1, n_noise - 1));
    if (split == Split::kTrain) {
      u_end = utts - cfg.heldout_utts;
      n_end = n_noise > 1 ? n_noise - held_noise : n_noise;
    } else {
      u_begin = utts - cfg.heldout_utts;
      n_begin = n_noise > 1 ? n_noise - held_noise : 0;
    }
  }
  const auto enroll_len =
      static_cast<std::size_t>(std::llround(cfg.enroll_s * sc.sample_rate));

  std::vector<ConditionTriplet> pool;
  for (int s = 0; s < sc.n_speakers; ++s) {
    for (int u = u_begin; u < u_end; ++u) {
      std::mt19937_64 rng(derive_seed(
          cfg.seed, {static_cast<uint64_t>(s), static_cast<uint64_t>(u)}));
      std::vector<const SourceClip*> enroll;
      std::size_t have = 0;
      for (int k = 1; k < utts && have < enroll_len; ++k) {
        const SourceClip& c = corpus.utterance(s, (u + k) % utts);
        enroll.push_back(&c);
        have += c.waveform.size();
      }
      int other = std::uniform_int_distribution<int>(0, sc.n_speakers - 2)(rng);
      if (other >= s) ++other;
      const int iu = std::uniform_int_distribution<int>(u_begin, u_end - 1)(rng);
      const int nk = std::uniform_int_distribution<int>(n_begin, n_end - 1)(rng);
      const double sir =
          std::uniform_real_distribution<double>(cfg.sir_min_db, cfg.sir_max_db)(rng);
      const double snr =
          std::uniform_real_distribution<double>(cfg.snr_min_db, cfg.snr_max_db)(rng);
      ConditionTriplet t =
          make_triplet(corpus.utterance(s, u), enroll, corpus.utterance(other, iu),
                       corpus.noise[static_cast<std::size_t>(nk)], sir, snr);
      if (t.enrollment.size() > enroll_len) {
        t.enrollment = t.enrollment.truncated(enroll_len);
      }
      pool.push_back(std::move(t));
    }
  }
  return pool;
}

std::size_t Batch::item_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.conditions.size();
  return n;
}

Batch sample_batch(const std::vector<ConditionTriplet>& pool,
                   std::size_t batch_size, const TrainingMode& mode,
                   std::uint64_t rng_seed) {
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (eligible(pool[i], mode)) ok.push_back(i);
  }
  require(ok.size() >= batch_size, ErrorKind::kCapacity,
          "pool has " + std::to_string(ok.size()) + " eligible triplets for " +
              describe(mode) + ", batch needs " + std::to_string(batch_size));
  std::mt19937_64 rng(rng_seed);
  std::shuffle(ok.begin(), ok.end(), rng);
  Batch b;
  b.mode = mode;
  const std::vector<Condition> fixed = group_conditions(mode);
  for (std::size_t k = 0; k < batch_size; ++k) {
    BatchGroup g;
    g.triplet = ok[k];
    if (mode.kind == TrainingMode::Kind::kShuffled) {
      const std::vector<Condition> cs = present(pool[ok[k]]);
      g.conditions = {cs[std::uniform_int_distribution<std::size_t>(
          0, cs.size() - 1)(rng)]};
    } else {
      g.conditions = fixed;
    }
    b.groups.push_back(std::move(g));
  }
  return b;
}

std::vector<Batch> plan_epoch(const std::vector<ConditionTriplet>& pool,
                              std::size_t batch_size, const TrainingMode& mode,
                              std::uint64_t rng_seed) {
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  std::vector<BatchGroup> units;
  const std::vector<Condition> fixed = group_conditions(mode);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!eligible(pool[i], mode)) continue;
    if (mode.kind == TrainingMode::Kind::kShuffled) {
      for (Condition c : present(pool[i])) units.push_back({i, {c}});
    } else {
      units.push_back({i, fixed});
    }
  }
  require(!units.empty(), ErrorKind::kCapacity,
          "pool has no triplets eligible for " + describe(mode));
  std::mt19937_64 rng(rng_seed);
  std::shuffle(units.begin(), units.end(), rng);
  std::vector<Batch> out;
  for (std::size_t k = 0; k < units.size(); k += batch_size) {
    Batch b;
    b.mode = mode;
    const std::size_t end = std::min(units.size(), k + batch_size);
    b.groups.assign(units.begin() + static_cast<long>(k),
                    units.begin() + static_cast<long>(end));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace lgtse::data
