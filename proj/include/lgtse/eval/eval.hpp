// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgtse/data/data.hpp"
#include "lgtse/metrics/metrics.hpp"
#include "lgtse/model/lgtse_model.hpp"

namespace lgtse::eval {

// Anything that maps (mixture, enrollment) to an estimate of the target.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual Waveform extract(const data::ConditionTriplet& t, Condition c) const = 0;
  virtual std::string id() const = 0;
};

class ModelExtractor : public Extractor {
 public:
  ModelExtractor(const model::LgtseModel& m, std::string id)
      : model_(m), id_(std::move(id)) {}
  Waveform extract(const data::ConditionTriplet& t, Condition c) const override {
    return model_.forward(t.mixture(c), t.enrollment);
  }
  std::string id() const override { return id_; }

 private:
  const model::LgtseModel& model_;
  std::string id_;
};

// Returns the mixture unchanged.
class IdentityExtractor : public Extractor {
 public:
  Waveform extract(const data::ConditionTriplet& t, Condition c) const override {
    return t.mixture(c);
  }
  std::string id() const override { return "identity-stub"; }
};

// Returns the clean target.
class OracleExtractor : public Extractor {
 public:
  Waveform extract(const data::ConditionTriplet& t, Condition) const override {
    return t.target;
  }
  std::string id() const override { return "oracle-stub"; }
};

struct ProbeRow {
  Condition condition = Condition::kSingleNoise;
  double relative_change = 0.0;  // mean ||Y_d - Y|| / ||Y|| (compressed domain)
  double si_sdr_in = 0.0;        // mixture vs noise-free mixture, dB
  double si_sdr_out = 0.0;       // denoised vs noise-free mixture, dB
  int n_items = 0;
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
  std::filesystem::path image;  // empty when not rendered
  const ProbeRow* find(Condition c) const;
};

struct EvalReport {
  std::string model_id;
  std::string corpus_id;
  std::vector<metrics::MetricRow> rows;         // processed, one per condition
  std::vector<metrics::MetricRow> unprocessed;  // mixture vs target
  std::map<std::string, std::string> metadata;  // seed, checkpoint, config hash
  std::optional<double> consistency_gap;
  std::optional<ProbeReport> probe;

  // Unweighted mean over rows; PESQ only when every row has it.
  static metrics::MetricRow mean(const std::vector<metrics::MetricRow>& rows);
  metrics::MetricRow aggregate() const { return mean(rows); }
  const metrics::MetricRow* row(Condition c) const;
  const metrics::MetricRow* unprocessed_row(Condition c) const;
};

struct EvalOptions {
  std::vector<Condition> conditions{kAllConditions.begin(), kAllConditions.end()};
  bool with_stoi = true;
  metrics::PesqHook pesq;             // unconfigured -> no PESQ column values
  std::filesystem::path scratch_dir;  // where PESQ input files are written
};

// Per-condition means of SI-SDR / STOI (/ PESQ) over every triplet that has
// the condition, for the extractor and for the unprocessed mixtures.
// Conditions with no items are skipped with a warning. Items run
// concurrently; sums are taken in pool order.
EvalReport evaluate(const Extractor& ex, const std::vector<data::ConditionTriplet>& pool,
                    const EvalOptions& options = {});

// Mean over triplets having both noisy mixtures of (1/T) sum |s1 - s2|,
// where s1, s2 are the extractions from 1spk+noise and 2spk+noise. NaN when
// no triplet qualifies.
double consistency_gap(const Extractor& ex,
                       const std::vector<data::ConditionTriplet>& pool);

// Front-end behaviour per condition. When image_path is set, the first
// complete triplet is rendered as a 2x3 grid of log-magnitude spectrograms
// (top: mixtures, bottom: denoised), fixed range [-60, 0] dB.
ProbeReport denoiser_probe(const model::LgtseModel& m,
                           const std::vector<data::ConditionTriplet>& pool,
                           const std::filesystem::path& image_path = {});

enum class Format { kMarkdown, kCsv, kText };
// Throws kUsage for unknown names.
Format parse_format(const std::string& name);
std::string render_report(const EvalReport& r, Format f);
// Inverse of render_report(r, kCsv) for ids, metadata and all metric rows.
EvalReport parse_report_csv(const std::string& csv);

struct CompareRow {
  Condition condition = Condition::kSingleNoise;
  double d_si_sdr = 0.0;  // a - b
  double d_stoi = 0.0;
  std::optional<double> d_pesq;
};

// Per-condition deltas a - b over the conditions both reports contain.
// Throws kValidation when they share none.
std::vector<CompareRow> compare(const EvalReport& a, const EvalReport& b);
std::string render_compare(const std::vector<CompareRow>& rows,
                           const std::string& a_id, const std::string& b_id);

// Writes an 8-bit grayscale PNG (row-major, values in [0, 1]).
void write_png_gray(const std::filesystem::path& path, int width, int height,
                    const std::vector<double>& pixels);

}  // namespace lgtse::eval
