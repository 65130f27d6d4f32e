// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <limits>
#include <spdlog/spdlog.h>

#include "lgtse/common/error.hpp"
#include "lgtse/common/parallel.hpp"
#include "lgtse/eval/eval.hpp"
#include "lgtse/signal/spectro.hpp"
#include "lgtse/signal/wav_io.hpp"
#include "lgtse/training/training.hpp"

namespace lgtse::eval {

namespace fs = std::filesystem;
using metrics::MetricRow;

namespace {

struct ItemScore {
  double si_sdr = 0.0, stoi = 0.0;
  double in_si_sdr = 0.0, in_stoi = 0.0;
  std::optional<double> pesq, in_pesq;
};

const MetricRow* find_row(const std::vector<MetricRow>& rows, Condition c) {
  for (const auto& r : rows) {
    if (r.condition == c) return &r;
  }
  return nullptr;
}

}  // namespace

const ProbeRow* ProbeReport::find(Condition c) const {
  for (const auto& r : rows) {
    if (r.condition == c) return &r;
  }
  return nullptr;
}

MetricRow EvalReport::mean(const std::vector<MetricRow>& rows) {
  MetricRow m;
  if (rows.empty()) return m;
  bool all_pesq = true;
  double pesq = 0.0;
  for (const auto& r : rows) {
    m.si_sdr += r.si_sdr;
    m.stoi += r.stoi;
    m.n_items += r.n_items;
    if (r.pesq) {
      pesq += *r.pesq;
    } else {
      all_pesq = false;
    }
  }
  const double n = static_cast<double>(rows.size());
  m.si_sdr /= n;
  m.stoi /= n;
  if (all_pesq) m.pesq = pesq / n;
  return m;
}

const MetricRow* EvalReport::row(Condition c) const { return find_row(rows, c); }
const MetricRow* EvalReport::unprocessed_row(Condition c) const {
  return find_row(unprocessed, c);
}

EvalReport evaluate(const Extractor& ex, const std::vector<data::ConditionTriplet>& pool,
                    const EvalOptions& options) {
  EvalReport report;
  report.model_id = ex.id();
  for (Condition c : options.conditions) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].has(c)) idx.push_back(i);
    }
    if (idx.empty()) {
      spdlog::warn("no items for condition {}; skipped", label(c));
      continue;
    }
    std::vector<ItemScore> scores(idx.size());
    std::vector<Waveform> estimates(options.pesq.configured() ? idx.size() : 0);
    const long n = static_cast<long>(idx.size());
    parallel_for(n, [&](long k) {
      const data::ConditionTriplet& t = pool[idx[k]];
      const Waveform& y = t.mixture(c);
      Waveform est = ex.extract(t, c);
      require(est.size() == t.target.size(), ErrorKind::kShape,
              "extractor output length differs from the target");
      ItemScore& s = scores[k];
      s.si_sdr = metrics::si_sdr(est, t.target);
      s.in_si_sdr = metrics::si_sdr(y, t.target);
      if (options.with_stoi) {
        s.stoi = metrics::stoi(est, t.target);
        s.in_stoi = metrics::stoi(y, t.target);
      }
      if (!estimates.empty()) estimates[k] = std::move(est);
    });
    if (options.pesq.configured()) {
      const fs::path dir = options.scratch_dir.empty()
                               ? fs::temp_directory_path() / "lgtse-pesq"
                               : options.scratch_dir;
      fs::create_directories(dir / std::string(libri2mix_name(c)));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const fs::path base = dir / std::string(libri2mix_name(c)) / std::to_string(idx[k]);
        const fs::path est = base.string() + "_est.wav", ref = base.string() + "_ref.wav",
                       mix = base.string() + "_mix.wav";
        signal::write_wav(est, estimates[k]);
        signal::write_wav(ref, pool[idx[k]].target);
        signal::write_wav(mix, pool[idx[k]].mixture(c));
        scores[k].pesq = options.pesq(est, ref);
        scores[k].in_pesq = options.pesq(mix, ref);
      }
    }
    MetricRow out, in;
    out.condition = in.condition = c;
    out.n_items = in.n_items = static_cast<int>(idx.size());
    double p_out = 0.0, p_in = 0.0;
    bool have_out = options.pesq.configured(), have_in = have_out;
    for (const ItemScore& s : scores) {  // pool order
      out.si_sdr += s.si_sdr;
      out.stoi += s.stoi;
      in.si_sdr += s.in_si_sdr;
      in.stoi += s.in_stoi;
      if (s.pesq) p_out += *s.pesq; else have_out = false;
      if (s.in_pesq) p_in += *s.in_pesq; else have_in = false;
    }
    const double nd = static_cast<double>(idx.size());
    out.si_sdr /= nd;
    in.si_sdr /= nd;
    out.stoi *= 100.0 / nd;
    in.stoi *= 100.0 / nd;
    if (have_out) out.pesq = p_out / nd;
    if (have_in) in.pesq = p_in / nd;
    if (options.pesq.configured() && !(have_out && have_in)) {
      spdlog::warn("PESQ unavailable for some {} items; column left empty", label(c));
    }
    report.rows.push_back(out);
    report.unprocessed.push_back(in);
  }
  return report;
}

double consistency_gap(const Extractor& ex,
                       const std::vector<data::ConditionTriplet>& pool) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].has(Condition::kSingleNoise) && pool[i].has(Condition::kTwoSpeakerNoise)) {
      idx.push_back(i);
    }
  }
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gaps(idx.size());
  const long n = static_cast<long>(idx.size());
  parallel_for(n, [&](long k) {
    const auto& t = pool[idx[k]];
    const Waveform a = ex.extract(t, Condition::kSingleNoise);
    const Waveform b = ex.extract(t, Condition::kTwoSpeakerNoise);
    require(a.size() == b.size() && !a.empty(), ErrorKind::kShape,
            "noisy extractions differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.samples[i] - b.samples[i]);
    gaps[k] = s / static_cast<double>(a.size());
  });
  double total = 0.0;
  for (double g : gaps) total += g;
  return total / static_cast<double>(gaps.size());
}

ProbeReport denoiser_probe(const model::LgtseModel& m,
                           const std::vector<data::ConditionTriplet>& pool,
                           const fs::path& image_path) {
  ProbeReport report;
  for (Condition c : kAllConditions) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].has(c)) idx.push_back(i);
    }
    if (idx.empty()) continue;
    struct Score {
      double rel, in, out;
    };
    std::vector<Score> scores(idx.size());
    const long n = static_cast<long>(idx.size());
    parallel_for(n, [&](long k) {
      const auto& t = pool[idx[k]];
      const Waveform& y = t.mixture(c);
      const Waveform& clean = training::denoising_target(t, c);
      signal::ComplexSpectrogram Y{m.compressed_spectrum(y), m.spectro().bins(),
                                   m.spectro()};
      const signal::ComplexSpectrogram Yd = m.denoise(Y);
      const double ny = Y.data.norm();
      scores[k].rel = ny > 0.0 ? (Yd.data - Y.data).norm() / ny : 0.0;
      scores[k].in = metrics::si_sdr(y, clean);
      scores[k].out = metrics::si_sdr(m.denoise_waveform(y), clean);
    });
    ProbeRow row;
    row.condition = c;
    row.n_items = static_cast<int>(idx.size());
    for (const Score& s : scores) {
      row.relative_change += s.rel;
      row.si_sdr_in += s.in;
      row.si_sdr_out += s.out;
    }
    row.relative_change /= row.n_items;
    row.si_sdr_in /= row.n_items;
    row.si_sdr_out /= row.n_items;
    report.rows.push_back(row);
  }

  if (!image_path.empty()) {
    auto it = std::find_if(pool.begin(), pool.end(),
                           [](const auto& t) { return t.complete(); });
    if (it == pool.end()) {
      spdlog::warn("denoiser probe: no complete triplet to render");
      return report;
    }
    const double inv_beta = 1.0 / m.spectro().beta;
    auto magnitude = [&](const Eigen::MatrixXd& z) {
      const long f = z.rows() / 2;
      Eigen::MatrixXd mag =
          (z.topRows(f).array().square() + z.bottomRows(f).array().square()).sqrt();
      return Eigen::MatrixXd(mag.array().pow(inv_beta));
    };
    std::vector<Eigen::MatrixXd> top, bottom;
    for (Condition c : kAllConditions) {
      signal::ComplexSpectrogram Y{m.compressed_spectrum(it->mixture(c)),
                                   m.spectro().bins(), m.spectro()};
      top.push_back(magnitude(Y.data));
      bottom.push_back(magnitude(m.denoise(Y).data));
    }
    double peak = 0.0;
    for (const auto* row : {&top, &bottom}) {
      for (const auto& p : *row) peak = std::max(peak, p.maxCoeff());
    }
    const int f = static_cast<int>(top[0].rows()), t = static_cast<int>(top[0].cols());
    const int gap = 4;
    const int width = 3 * t + 2 * gap, height = 2 * f + gap;
    std::vector<double> px(static_cast<std::size_t>(width) * height, 1.0);
    for (int r = 0; r < 2; ++r) {
      const auto& row = r == 0 ? top : bottom;
      for (int c = 0; c < 3; ++c) {
        for (int fi = 0; fi < f; ++fi) {
          for (int ti = 0; ti < t; ++ti) {
            const double mag = row[c](fi, ti);
            const double db =
                peak > 0.0 && mag > 0.0 ? 20.0 * std::log10(mag / peak) : -60.0;
            const double v = (std::clamp(db, -60.0, 0.0) + 60.0) / 60.0;
            const int x = c * (t + gap) + ti;
            const int y = r * (f + gap) + (f - 1 - fi);  // low frequencies at the bottom
            px[static_cast<std::size_t>(y) * width + x] = 1.0 - v;
          }
        }
      }
    }
    write_png_gray(image_path, width, height, px);
    report.image = image_path;
  }
  return report;
}

}  // namespace lgtse::eval
