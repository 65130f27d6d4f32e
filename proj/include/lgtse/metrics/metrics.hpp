// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgtse/common/condition.hpp"
#include "lgtse/signal/waveform.hpp"

namespace lgtse::metrics {

inline constexpr double kSiSdrClampDb = 60.0;

// Scale-invariant SDR, 10 log10(|a s|^2 / |a s - est|^2) with
// a = <est, s> / |s|^2. No mean removal. May return +/-inf.
double si_sdr_unclamped(std::span<const double> estimate,
                        std::span<const double> reference);
// Reporting form: clamped to [-60, 60] dB.
double si_sdr(const Waveform& estimate, const Waveform& reference);
double si_sdr(std::span<const double> estimate,
              std::span<const double> reference);

// Short-time objective intelligibility in [0, 1] (classic, non-extended).
// Signals are resampled to 10 kHz internally. Throws kLength when the input
// cannot produce one 384 ms analysis segment.
double stoi(const Waveform& estimate, const Waveform& reference);
// Minimum input length in samples at `sample_rate`.
std::size_t stoi_min_length(int sample_rate);

// Polyphase rational resampler with the Kaiser-windowed sinc filter used by
// common STOI implementations (60 dB rejection). Exposed for testing.
std::vector<double> resample(std::span<const double> x, int to_rate,
                             int from_rate);

// External PESQ evaluator. `command_template` contains {estimate} and
// {reference} placeholders; the score is parsed from the last non-empty
// line of standard output. Returns nullopt (and logs a warning) on any
// failure, never throws.
class PesqHook {
 public:
  PesqHook() = default;
  explicit PesqHook(std::string command_template)
      : template_(std::move(command_template)) {}
  // Reads the template from LGTSE_PESQ_CMD; unconfigured when unset.
  static PesqHook from_environment();

  bool configured() const { return !template_.empty(); }
  std::optional<double> operator()(const std::filesystem::path& estimate,
                                   const std::filesystem::path& reference) const;
  const std::string& command_template() const { return template_; }

 private:
  std::string template_;
};

// Per-condition aggregate mirroring one group of report columns.
struct MetricRow {
  Condition condition = Condition::kSingleNoise;
  double si_sdr = 0.0;  // dB
  double stoi = 0.0;    // percent
  std::optional<double> pesq;
  int n_items = 0;

  void validate() const;
};

}  // namespace lgtse::metrics
