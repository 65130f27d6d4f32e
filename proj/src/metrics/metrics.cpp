// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/metrics/metrics.hpp"

#include <spdlog/spdlog.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>

#include "lgtse/common/error.hpp"
#include "lgtse/signal/fft.hpp"

namespace lgtse::metrics {

namespace {

constexpr int kStoiRate = 10000;
constexpr int kStoiFrame = 256;
constexpr int kStoiHop = 128;
constexpr int kStoiFft = 512;
constexpr int kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr int kStoiSegment = 30;  // 384 ms at 10 kHz / 128-sample hop
constexpr double kStoiBeta = -15.0;
constexpr double kStoiDynRange = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Hann of length n + 2 with both zero endpoints removed.
std::vector<double> stoi_window() {
  std::vector<double> w(kStoiFrame);
  const double m = kStoiFrame + 1;  // (M - 1) for M = n + 2
  for (int i = 0; i < kStoiFrame; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / m);
  }
  return w;
}

// Frame starts used by the reference algorithm: range(0, len - frame, hop).
std::vector<std::size_t> frame_starts(std::size_t len) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i + kStoiFrame < len; i += kStoiHop) s.push_back(i);
  return s;
}

struct Band {
  int lo;
  int hi;  // exclusive
};

std::vector<Band> third_octave_bands() {
  const int bins = kStoiFft / 2 + 1;
  std::vector<double> f(bins);
  for (int k = 0; k < bins; ++k) {
    f[k] = static_cast<double>(k) * kStoiRate / kStoiFft;
  }
  auto nearest = [&](double target) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < bins; ++k) {
      const double d = (f[k] - target) * (f[k] - target);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<Band> bands;
  for (int i = 0; i < kStoiBands; ++i) {
    const double lo = kStoiMinFreq * std::pow(2.0, (2.0 * i - 1.0) / 6.0);
    const double hi = kStoiMinFreq * std::pow(2.0, (2.0 * i + 1.0) / 6.0);
    bands.push_back({nearest(lo), nearest(hi)});
  }
  return bands;
}

// Drops frames of `ref` more than 40 dB below its loudest frame (and the
// aligned frames of `est`), then overlap-adds what remains.
void remove_silent_frames(std::vector<double>& ref, std::vector<double>& est) {
  const auto w = stoi_window();
  const auto starts = frame_starts(ref.size());
  std::vector<double> energy(starts.size());
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double e = 0.0;
    for (int i = 0; i < kStoiFrame; ++i) {
      const double v = w[i] * ref[starts[f] + i];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + kEps);
  }
  const double mx =
      energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (mx - kStoiDynRange - energy[f] < 0.0) keep.push_back(starts[f]);
  }
  const std::size_t out_len =
      keep.empty() ? 0 : (keep.size() - 1) * kStoiHop + kStoiFrame;
  std::vector<double> r(out_len, 0.0), e(out_len, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const std::size_t dst = k * kStoiHop;
    for (int i = 0; i < kStoiFrame; ++i) {
      r[dst + i] += w[i] * ref[keep[k] + i];
      e[dst + i] += w[i] * est[keep[k] + i];
    }
  }
  ref = std::move(r);
  est = std::move(e);
}

// Third-octave band envelopes, [bands][frames].
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x,
                                                const std::vector<Band>& bands) {
  const auto w = stoi_window();
  const auto starts = frame_starts(x.size());
  const auto fft = signal::RealFft::get(kStoiFft);
  std::vector<double> buf(kStoiFft, 0.0);
  std::vector<std::complex<double>> spec(fft->bins());
  std::vector<std::vector<double>> env(bands.size(),
                                       std::vector<double>(starts.size()));
  for (std::size_t f = 0; f < starts.size(); ++f) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < kStoiFrame; ++i) buf[i] = w[i] * x[starts[f] + i];
    fft->forward(buf, spec);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      double p = 0.0;
      for (int k = bands[b].lo; k < bands[b].hi; ++k) p += std::norm(spec[k]);
      env[b][f] = std::sqrt(p);
    }
  }
  return env;
}

double norm_of(const double* v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

double si_sdr_unclamped(std::span<const double> estimate,
                        std::span<const double> reference) {
  require(estimate.size() == reference.size(), ErrorKind::kShape,
          "SI-SDR needs equal lengths");
  const double ss = dot(reference, reference);
  require(ss > 0.0, ErrorKind::kDomain, "SI-SDR reference is identically zero");
  const double alpha = dot(estimate, reference) / ss;
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = alpha * reference[i] - estimate[i];
    err += e * e;
  }
  const double target = alpha * alpha * ss;
  return 10.0 * std::log10(target / err);
}

double si_sdr(std::span<const double> estimate,
              std::span<const double> reference) {
  const double v = si_sdr_unclamped(estimate, reference);
  if (std::isnan(v)) return -kSiSdrClampDb;
  return std::clamp(v, -kSiSdrClampDb, kSiSdrClampDb);
}

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  return si_sdr(std::span<const double>(estimate.samples),
                std::span<const double>(reference.samples));
}

std::vector<double> resample(std::span<const double> x, int to_rate,
                             int from_rate) {
  require(to_rate > 0 && from_rate > 0, ErrorKind::kConfig,
          "resample rates must be positive");
  const int g = std::gcd(to_rate, from_rate);
  const long up = to_rate / g;
  const long down = from_rate / g;
  if (up == 1 && down == 1) return std::vector<double>(x.begin(), x.end());

  const double stop = 1.0 / (2.0 * static_cast<double>(std::max(up, down)));
  const double roll = stop / 10.0;
  const double rejection_db = 60.0;
  const long half = static_cast<long>(
      std::ceil((rejection_db - 8.0) / (28.714 * roll)));
  const double beta = 0.1102 * (rejection_db - 8.7);
  const long taps = 2 * half + 1;
  std::vector<double> h(taps);
  const double alpha = (taps - 1) / 2.0;
  const double i0b = std::cyl_bessel_i(0.0, beta);
  double sum = 0.0;
  for (long i = 0; i < taps; ++i) {
    const double t = static_cast<double>(i - half);
    const double r = (i - alpha) / alpha;
    const double kaiser =
        std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) /
        i0b;
    h[i] = kaiser * 2.0 * up * stop * sinc(2.0 * stop * t);
    sum += h[i];
  }
  for (double& v : h) v = v / sum * up;

  const long n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down - 1) / down;
  std::vector<double> y(n_out, 0.0);
  for (long m = 0; m < n_out; ++m) {
    // y[m] = sum_n x[n] h[m*down - n*up + half] over valid taps.
    const long center = m * down + half;
    long n_lo = center - (taps - 1);
    n_lo = n_lo <= 0 ? 0 : (n_lo + up - 1) / up;
    const long n_hi = std::min(n_in - 1, center / up);
    double acc = 0.0;
    for (long n = n_lo; n <= n_hi; ++n) acc += x[n] * h[center - n * up];
    y[m] = acc;
  }
  return y;
}

std::size_t stoi_min_length(int sample_rate) {
  // Needs kStoiSegment frames: len10k - frame > (segment - 1) * hop.
  const long need10k = kStoiFrame + (kStoiSegment - 1) * kStoiHop + 1;
  std::size_t n = 1;
  while (static_cast<long>((static_cast<long long>(n) * kStoiRate +
                            sample_rate - 1) /
                           sample_rate) < need10k) {
    ++n;
  }
  return n;
}

double stoi(const Waveform& estimate, const Waveform& reference) {
  require(estimate.size() == reference.size(), ErrorKind::kShape,
          "STOI needs equal lengths");
  require(estimate.sample_rate == reference.sample_rate &&
              reference.sample_rate > 0,
          ErrorKind::kConfig, "STOI needs matching positive sample rates");
  require(reference.size() >= stoi_min_length(reference.sample_rate),
          ErrorKind::kLength, "input too short for STOI");

  std::vector<double> ref =
      resample(reference.samples, kStoiRate, reference.sample_rate);
  std::vector<double> est =
      resample(estimate.samples, kStoiRate, estimate.sample_rate);
  remove_silent_frames(ref, est);

  static const std::vector<Band> bands = third_octave_bands();
  const auto xe = band_envelopes(ref, bands);
  const auto ye = band_envelopes(est, bands);
  const int frames = xe.empty() ? 0 : static_cast<int>(xe[0].size());
  // Mirrors the reference implementation's fallback for mostly-silent input.
  if (frames < kStoiSegment) return 1e-5;

  const double clip = std::pow(10.0, -kStoiBeta / 20.0);
  const int segments = frames - kStoiSegment + 1;
  double total = 0.0;
  std::array<double, kStoiSegment> xs{}, ys{};
  for (int m = 0; m < segments; ++m) {
    for (int b = 0; b < kStoiBands; ++b) {
      for (int i = 0; i < kStoiSegment; ++i) {
        xs[i] = xe[b][m + i];
        ys[i] = ye[b][m + i];
      }
      const double a =
          norm_of(xs.data(), kStoiSegment) / (norm_of(ys.data(), kStoiSegment) + kEps);
      for (int i = 0; i < kStoiSegment; ++i) {
        ys[i] = std::min(ys[i] * a, xs[i] * (1.0 + clip));
      }
      double mx = 0.0, my = 0.0;
      for (int i = 0; i < kStoiSegment; ++i) {
        mx += xs[i];
        my += ys[i];
      }
      mx /= kStoiSegment;
      my /= kStoiSegment;
      for (int i = 0; i < kStoiSegment; ++i) {
        xs[i] -= mx;
        ys[i] -= my;
      }
      const double nx = norm_of(xs.data(), kStoiSegment) + kEps;
      const double ny = norm_of(ys.data(), kStoiSegment) + kEps;
      double c = 0.0;
      for (int i = 0; i < kStoiSegment; ++i) c += (xs[i] / nx) * (ys[i] / ny);
      total += c;
    }
  }
  // Mean correlation can dip below zero for anti-correlated envelopes.
  return std::max(0.0, total / (static_cast<double>(segments) * kStoiBands));
}

PesqHook PesqHook::from_environment() {
  const char* env = std::getenv("LGTSE_PESQ_CMD");
  return env ? PesqHook(env) : PesqHook();
}

std::optional<double> PesqHook::operator()(
    const std::filesystem::path& estimate,
    const std::filesystem::path& reference) const {
  if (!configured()) return std::nullopt;
  auto quote = [](const std::string& s) {
    std::string q = "'";
    for (char c : s) {
      if (c == '\'') {
        q += "'\\''";
      } else {
        q += c;
      }
    }
    return q + "'";
  };
  std::string cmd = template_;
  auto substitute = [&cmd](const std::string& key, const std::string& value) {
    for (std::size_t p = cmd.find(key); p != std::string::npos;
         p = cmd.find(key, p + value.size())) {
      cmd.replace(p, key.size(), value);
    }
  };
  substitute("{estimate}", quote(estimate.string()));
  substitute("{reference}", quote(reference.string()));

  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    spdlog::warn("PESQ hook could not start: {}", cmd);
    return std::nullopt;
  }
  std::string out;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    spdlog::warn("PESQ hook exited with failure status ({})", status);
    return std::nullopt;
  }
  // Last non-empty line.
  std::string last;
  std::size_t end = out.size();
  while (end > 0) {
    std::size_t start = out.rfind('\n', end - 1);
    start = start == std::string::npos ? 0 : start + 1;
    std::string line = out.substr(start, end - start);
    line.erase(0, line.find_first_not_of(" \t\r\n"));
    line.erase(line.find_last_not_of(" \t\r\n") + 1);
    if (!line.empty()) {
      last = line;
      break;
    }
    if (start == 0) break;
    end = start - 1;
  }
  char* parse_end = nullptr;
  const double v = std::strtod(last.c_str(), &parse_end);
  if (last.empty() || parse_end != last.c_str() + last.size() ||
      !std::isfinite(v)) {
    spdlog::warn("PESQ hook output not a number: '{}'", last);
    return std::nullopt;
  }
  return v;
}

void MetricRow::validate() const {
  require(n_items >= 1, ErrorKind::kValidation, "MetricRow needs n_items >= 1");
  require(std::isfinite(si_sdr), ErrorKind::kValidation,
          "MetricRow si_sdr must be finite");
  require(stoi >= 0.0 && stoi <= 100.0, ErrorKind::kValidation,
          "MetricRow stoi must lie in [0, 100]");
}

}  // namespace lgtse::metrics
