// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "lgtse/common/error.hpp"
#include "lgtse/common/seed.hpp"
#include "lgtse/data/data.hpp"

namespace lgtse::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Voice {
  double f0;
  std::array<double, 3> formant;    // Hz
  std::array<double, 3> bandwidth;  // Hz
  double tilt;                      // dB per octave above f0
};

double formant_gain(const Voice& v, double freq, double shift) {
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double fc = v.formant[k] * (k < 2 ? shift : 1.0);
    const double x = (freq - fc) / v.bandwidth[k];
    g += std::pow(0.6, k) / (1.0 + x * x);
  }
  const double octaves = std::log2(std::max(freq / v.f0, 1.0));
  return g * std::pow(10.0, v.tilt * octaves / 20.0);
}

std::vector<double> pseudo_speech(const Voice& v, std::size_t n, int rate,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int harmonics = static_cast<int>(0.45 * rate / v.f0);
  std::vector<double> phase(harmonics);
  for (double& p : phase) p = kTwoPi * u(rng);

  std::vector<double> out(n, 0.0);
  double t0 = 0.02 + 0.08 * u(rng);
  while (t0 < static_cast<double>(n) / rate) {
    const double dur = 0.12 + 0.18 * u(rng);
    const double shift = 0.8 + 0.4 * u(rng);  // vowel identity
    const double level = 0.5 + 0.5 * u(rng);
    std::vector<double> amp(harmonics);
    for (int h = 0; h < harmonics; ++h) {
      amp[h] = level * formant_gain(v, (h + 1) * v.f0, shift);
    }
    const auto begin = static_cast<std::size_t>(t0 * rate);
    const auto end =
        std::min(n, static_cast<std::size_t>((t0 + dur) * rate));
    for (std::size_t i = begin; i < end; ++i) {
      const double t = static_cast<double>(i) / rate;
      const double env =
          0.5 - 0.5 * std::cos(kTwoPi * (t - t0) / dur);  // raised cosine
      double acc = 0.0;
      for (int h = 0; h < harmonics; ++h) {
        acc += amp[h] * std::sin(kTwoPi * (h + 1) * v.f0 * t + phase[h]);
      }
      out[i] += env * acc;
    }
    t0 += dur + 0.02 + 0.1 * u(rng);
  }
  return out;
}

std::vector<double> coloured_noise(std::size_t n, int rate,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  // One-pole low-pass in parallel with a resonant band.
  const double a = 0.95 * u(rng);
  const double fc = 200.0 + 2800.0 * u(rng);
  const double r = 0.9 + 0.08 * u(rng);
  const double theta = kTwoPi * fc / rate;
  const double b1 = 2.0 * r * std::cos(theta), b2 = -r * r;
  const double mix = u(rng);
  // Slow level fluctuation.
  const double am_rate = 0.5 + 3.0 * u(rng), am_depth = 0.5 * u(rng);
  const double am_phase = kTwoPi * u(rng);

  std::vector<double> out(n);
  double lp = 0.0, z1 = 0.0, z2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g(rng);
    lp = a * lp + (1.0 - a) * w;
    const double bp = (1.0 - r) * w + b1 * z1 + b2 * z2;
    z2 = z1;
    z1 = bp;
    const double t = static_cast<double>(i) / rate;
    const double am = 1.0 + am_depth * std::sin(kTwoPi * am_rate * t + am_phase);
    out[i] = am * ((1.0 - mix) * lp + mix * bp);
  }
  return out;
}

void normalize(std::vector<double>& x, double rms_db) {
  double e = 0.0, peak = 0.0;
  for (double v : x) {
    e += v * v;
    peak = std::max(peak, std::abs(v));
  }
  if (e <= 0.0) return;
  double g = std::pow(10.0, rms_db / 20.0) / std::sqrt(e / x.size());
  g = std::min(g, 0.9 / peak);
  for (double& v : x) v *= g;
}

}  // namespace

void SynthConfig::validate() const {
  require(n_speakers >= 2, ErrorKind::kValidation,
          "need at least 2 speakers so an interferer exists");
  require(utts_per_speaker >= 2, ErrorKind::kValidation,
          "need at least 2 utterances per speaker (target and enrollment)");
  require(duration_s > 0.0 && sample_rate > 0 && noise_clips >= 0,
          ErrorKind::kValidation, "duration, rate and noise count must be >= 0");
}

const SourceClip& Corpus::utterance(int speaker, int utt) const {
  require(speaker >= 0 && speaker < config.n_speakers && utt >= 0 &&
              utt < config.utts_per_speaker,
          ErrorKind::kShape, "utterance index out of range");
  return speech[static_cast<std::size_t>(speaker * config.utts_per_speaker +
                                         utt)];
}

std::string Corpus::speaker_name(int speaker) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%03d", speaker);
  return buf;
}

Corpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Corpus c;
  c.config = cfg;
  const auto n = static_cast<std::size_t>(
      std::llround(cfg.duration_s * cfg.sample_rate));
  require(n > 0, ErrorKind::kLength, "clip duration rounds to zero samples");

  for (int s = 0; s < cfg.n_speakers; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {1, static_cast<uint64_t>(s)}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Voice v;
    // Evenly spaced fundamentals with bounded jitter keep speakers distinct.
    const double step = 150.0 / cfg.n_speakers;
    v.f0 = 90.0 + step * (s + 0.25 + 0.5 * u(rng));
    v.formant = {300.0 + 500.0 * u(rng), 900.0 + 1300.0 * u(rng),
                 2300.0 + 1000.0 * u(rng)};
    v.formant[2] = std::min(v.formant[2], 0.45 * cfg.sample_rate);
    v.bandwidth = {60.0 + 60.0 * u(rng), 80.0 + 80.0 * u(rng),
                   120.0 + 100.0 * u(rng)};
    v.tilt = -3.0 - 6.0 * u(rng);
    c.f0.push_back(v.f0);
    for (int k = 0; k < cfg.utts_per_speaker; ++k) {
      std::mt19937_64 urng(derive_seed(
          cfg.seed, {2, static_cast<uint64_t>(s), static_cast<uint64_t>(k)}));
      std::vector<double> x = pseudo_speech(v, n, cfg.sample_rate, urng);
      normalize(x, -26.0 + 6.0 * std::uniform_real_distribution<double>(
                                     -1.0, 1.0)(urng));
      c.speech.push_back({Corpus::speaker_name(s), k, ClipKind::kSpeech,
                          Waveform(std::move(x), cfg.sample_rate)});
    }
  }
  const int noise_count = cfg.noise_clips > 0
                              ? cfg.noise_clips
                              : cfg.n_speakers * cfg.utts_per_speaker;
  for (int k = 0; k < noise_count; ++k) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {3, static_cast<uint64_t>(k)}));
    std::vector<double> x = coloured_noise(n, cfg.sample_rate, rng);
    normalize(x, -26.0);
    c.noise.push_back(
        {"", k, ClipKind::kNoise, Waveform(std::move(x), cfg.sample_rate)});
  }
  return c;
}

}  // namespace lgtse::data
