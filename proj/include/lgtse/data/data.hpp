// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "lgtse/common/condition.hpp"
#include "lgtse/signal/waveform.hpp"

namespace lgtse::data {

inline constexpr double kDisabledDb = -std::numeric_limits<double>::infinity();

enum class ClipKind { kSpeech, kNoise };

struct SourceClip {
  std::string speaker_id;  // empty for noise
  int utterance = 0;       // index within the speaker (or noise clip index)
  ClipKind kind = ClipKind::kSpeech;
  Waveform waveform;
};

struct SynthConfig {
  int n_speakers = 4;
  int utts_per_speaker = 8;
  double duration_s = 1.0;
  int sample_rate = 8000;
  std::uint64_t seed = 0;
  // Noise clips generated; 0 means one per speech utterance.
  int noise_clips = 0;

  void validate() const;
};

struct Corpus {
  SynthConfig config;
  std::vector<SourceClip> speech;  // speaker-major, utterance-minor
  std::vector<SourceClip> noise;
  // Per-speaker fundamental frequency in Hz.
  std::vector<double> f0;

  const SourceClip& utterance(int speaker, int utt) const;
  static std::string speaker_name(int speaker);
};

// Pseudo-speech corpus: each speaker has a fixed fundamental and formant
// layout; utterances differ in syllable timing, vowel and level. Noise clips
// are coloured Gaussian noise. Pure function of the config.
Corpus synth_corpus(const SynthConfig& cfg);

// Writes speech/<speaker>/<utt>.wav, noise/<k>.wav and index.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// a + g*b over the common prefix, where g puts b at `gain_db` relative to a
// (10 log10(|g b|^2 / |a|^2) = gain_db on that prefix). kDisabledDb, or a
// silent b, adds nothing.
Waveform mix_min(const Waveform& a, const Waveform& b, double gain_db);

struct ConditionTriplet {
  Waveform target;      // s
  Waveform enrollment;  // e
  Waveform y_single;    // s + n
  Waveform y_clean2;    // s + i
  Waveform y_both;      // s + i + n
  std::string speaker_id;
  std::string interferer_id;
  int target_utt = 0;
  std::vector<int> enrollment_utts;
  double snr_db = 0.0;  // s over n
  double sir_db = 0.0;  // s over i

  // An empty mixture means the condition is absent (partial manifests).
  const Waveform& mixture(Condition c) const;
  Waveform& mixture(Condition c);
  bool has(Condition c) const { return !mixture(c).empty(); }
  bool complete() const;

  // Checks the type invariants. `construction_tol` bounds
  // |y_both - y_clean2 - (y_single - s)| and is loosened for quantized files.
  void validate(double construction_tol = 1e-9) const;
};

// Mixes one triplet. snr_db/sir_db are target-over-noise and
// target-over-interferer ratios; +inf disables that component. All sources
// are cut to their common length first and the same scaled noise enters both
// noisy mixtures.
ConditionTriplet make_triplet(const SourceClip& target,
                              const std::vector<const SourceClip*>& enrollment,
                              const SourceClip& interferer,
                              const SourceClip& noise, double sir_db,
                              double snr_db);

enum class Split { kTrain, kHeldOut, kAll };

struct PoolConfig {
  std::uint64_t seed = 0;
  double enroll_s = 2.0;
  int heldout_utts = 2;  // last utterances of every speaker
  double sir_min_db = -5.0, sir_max_db = 5.0;
  double snr_min_db = 0.0, snr_max_db = 15.0;

  void validate() const;
};

// One triplet per target utterance of the split. Enrollment is built from the
// speaker's following utterances (never the target). Noise clips are split in
// the same proportion as utterances.
std::vector<ConditionTriplet> build_pool(const Corpus& corpus,
                                         const PoolConfig& cfg, Split split);

// A group shares one target and enrollment; it holds one or more conditions.
struct BatchGroup {
  std::size_t triplet = 0;
  std::vector<Condition> conditions;
};

struct Batch {
  TrainingMode mode;
  std::vector<BatchGroup> groups;

  std::size_t item_count() const;
};

// Draws batch_size groups without replacement:
//   condition-wise: one item of the fixed condition per group;
//   shuffled: one item per group, condition uniform, no sharing;
//   triplec: (1spk+noise, 2spk+noise) per group;
//   triplec-parallel: all three conditions per group.
// Triplets lacking a required condition are never drawn. Throws kCapacity
// when fewer than batch_size eligible triplets exist.
Batch sample_batch(const std::vector<ConditionTriplet>& pool,
                   std::size_t batch_size, const TrainingMode& mode,
                   std::uint64_t rng_seed);

// One epoch: a seeded permutation over every eligible (triplet) unit, cut
// into batches of batch_size groups; the last short batch is kept. In
// shuffled mode the units are (triplet, condition) pairs, so an epoch sees
// every mixture once.
std::vector<Batch> plan_epoch(const std::vector<ConditionTriplet>& pool,
                              std::size_t batch_size, const TrainingMode& mode,
                              std::uint64_t rng_seed);

// Libri2Mix-style manifest ingestion.
struct ManifestRowError {
  std::size_t line = 0;
  std::string reason;
};

struct ManifestLoad {
  std::vector<ConditionTriplet> pool;
  std::vector<ManifestRowError> rejected;
};

// CSV header: condition,mixture_path,source1_path,enrollment_path,noise_path,
// sample_rate. Relative paths resolve against the manifest's directory. Rows
// sharing (source1_path, enrollment_path) form one triplet; bad rows are
// rejected individually and listed in the result.
ManifestLoad load_libri2mix_manifest(const std::filesystem::path& path);

}  // namespace lgtse::data
