// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "lgtse/common/error.hpp"
#include "lgtse/metrics/metrics.hpp"
#include "support/test_support.hpp"

namespace lgtse::metrics {
namespace {

using test::Lcg;
using test::randn;

// Same generator as tests/oracles/stoi_oracle.py.
std::vector<double> oracle_reference(Lcg& g, int rate, int n, bool silent) {
  const double f0 = 100.0 + 200.0 * g.uniform();
  double phases[4];
  for (double& p : phases) p = 2.0 * std::numbers::pi * g.uniform();
  std::vector<double> ref(n);
  for (int i = 0; i < n; ++i) {
    const double am = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 2.5 * i / rate);
    double v = 0.0;
    for (int h = 0; h < 4; ++h) {
      v += std::sin(2.0 * std::numbers::pi * (h + 1) * f0 * i / rate + phases[h]) / (h + 1);
    }
    ref[i] = am * v + 0.01 * g.symmetric();
  }
  if (silent) {
    for (int i = rate / 2; i < (rate * 8) / 10; ++i) ref[i] = 0.0;
  }
  return ref;
}

nlohmann::json oracle() {
  std::ifstream in(std::string(LGTSE_ORACLE_DIR) + "/stoi_pystoi.json");
  EXPECT_TRUE(in.good());
  return nlohmann::json::parse(in);
}

// Brute-force projection formula in long double.
double brute_si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  long double es = 0, ss = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    es += static_cast<long double>(est[i]) * ref[i];
    ss += static_cast<long double>(ref[i]) * ref[i];
  }
  const long double a = es / ss;
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const long double t = a * ref[i], e = t - est[i];
    num += t * t;
    den += e * e;
  }
  return static_cast<double>(10.0L * std::log10(num / den));
}

TEST(SiSdr, Examples) {
  const auto s = randn(100, 1);
  EXPECT_EQ(si_sdr(s, s), 60.0);
  std::vector<double> s3(s);
  for (double& x : s3) x *= 3.0;
  EXPECT_EQ(si_sdr(s3, s), 60.0);
  EXPECT_NEAR(si_sdr(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.0, 1e-12);
  std::vector<double> neg(s);
  for (double& x : neg) x = -x;
  EXPECT_EQ(si_sdr(neg, s), 60.0);  // projection absorbs the sign
}

TEST(SiSdr, Errors) {
  try {
    si_sdr(randn(5, 1), std::vector<double>(5, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
  try {
    si_sdr(randn(5, 1), randn(6, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(SiSdr, MatchesBruteForceAndIsScaleInvariant) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto ref = randn(257, 2 * k), est = randn(257, 2 * k + 1);
    const double v = si_sdr_unclamped(est, ref);
    EXPECT_NEAR(v, brute_si_sdr(est, ref), 1e-9);
    for (double c : {-3.0, 1e-3, 17.0}) {
      std::vector<double> sc(est);
      for (double& x : sc) x *= c;
      EXPECT_NEAR(si_sdr_unclamped(sc, ref), v, 1e-9);
    }
  }
}

TEST(SiSdr, DecreasesAlongNoiseLadder) {
  const auto s = randn(1000, 3), n = randn(1000, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 1; step <= 10; ++step) {
    std::vector<double> est(s);
    for (std::size_t i = 0; i < est.size(); ++i) est[i] += 0.05 * step * n[i];
    const double v = si_sdr(est, s);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Stoi, MatchesPystoi) {
  const auto j = oracle();
  for (const auto& c : j.at("noisy")) {
    const int k = c.at("case"), rate = c.at("rate");
    const int n = 3 * rate / 2;
    Lcg g(1000 + static_cast<std::uint64_t>(k));
    const auto ref = oracle_reference(g, rate, n, k % 2 == 1);
    const double level = 0.01 * std::ldexp(1.0, k);
    std::vector<double> est(n);
    for (int i = 0; i < n; ++i) est[i] = ref[i] + level * g.symmetric();
    const double got = stoi(Waveform(est, rate), Waveform(ref, rate));
    EXPECT_NEAR(got, c.at("stoi").get<double>(), 1e-6) << "case " << k;
  }
}

TEST(Stoi, NegatedEstimateMatchesPystoi) {
  const auto j = oracle();
  for (const auto& c : j.at("negated")) {
    const int k = c.at("case"), rate = c.at("rate");
    Lcg g(2000 + static_cast<std::uint64_t>(k));
    const auto ref = oracle_reference(g, rate, 2 * rate, false);
    std::vector<double> neg(ref);
    for (double& x : neg) x = -x;
    const Waveform r(ref, rate);
    const double same = stoi(r, r), negated = stoi(Waveform(neg, rate), r);
    EXPECT_NEAR(same, c.at("stoi_same").get<double>(), 1e-9);
    EXPECT_NEAR(negated, c.at("stoi_negated").get<double>(), 1e-9);
    EXPECT_NEAR(negated, same, 1e-9);
  }
}

TEST(Stoi, PerfectNoisyRangeAndDeterminism) {
  Lcg g(77);
  const auto ref = oracle_reference(g, 8000, 12000, false);
  const Waveform r(ref, 8000);
  EXPECT_GE(stoi(r, r), 0.99);
  // Reference-shaped independent noise at -10 dB SNR.
  Lcg g2(78);
  const auto shaped = oracle_reference(g2, 8000, 12000, false);
  std::vector<double> noisy(ref);
  const double gain = std::sqrt(10.0);
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += gain * shaped[i];
  const double v = stoi(Waveform(noisy, 8000), r);
  EXPECT_LT(v, stoi(r, r));
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
  EXPECT_EQ(v, stoi(Waveform(noisy, 8000), r));
}

TEST(Stoi, TooShortIsLengthError) {
  const std::size_t n = stoi_min_length(8000) - 1;
  try {
    stoi(test::random_wave(n, 1), test::random_wave(n, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLength);
  }
  EXPECT_NO_THROW(stoi(test::random_wave(n + 1, 1), test::random_wave(n + 1, 2)));
}

TEST(Resample, PreservesLowFrequencyTone) {
  std::vector<double> x(8000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 8000.0);
  }
  const auto y = resample(x, 10000, 8000);
  ASSERT_EQ(y.size(), 10000u);
  double worst = 0.0;
  for (std::size_t i = 500; i < 9500; ++i) {
    const double want = std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 10000.0);
    worst = std::max(worst, std::abs(y[i] - want));
  }
  EXPECT_LT(worst, 1e-2);
}

TEST(Pesq, HookBehaviour) {
  test::TempDir dir;
  EXPECT_FALSE(PesqHook().configured());
  EXPECT_FALSE(PesqHook()(dir / "a.wav", dir / "b.wav").has_value());
  const auto ok = PesqHook("echo noise; echo 2.14 # {estimate} {reference}")(dir / "a.wav",
                                                                           dir / "b.wav");
  ASSERT_TRUE(ok.has_value());
  EXPECT_DOUBLE_EQ(*ok, 2.14);
  EXPECT_FALSE(PesqHook("echo 3.0; exit 3")(dir / "a.wav", dir / "b.wav").has_value());
  EXPECT_FALSE(PesqHook("echo garbage")(dir / "a.wav", dir / "b.wav").has_value());
}

TEST(MetricRow, Validate) {
  MetricRow r{Condition::kTwoSpeaker, 3.0, 50.0, std::nullopt, 1};
  EXPECT_NO_THROW(r.validate());
  r.n_items = 0;
  EXPECT_THROW(r.validate(), Error);
  r.n_items = 1;
  r.stoi = 101.0;
  EXPECT_THROW(r.validate(), Error);
}

}  // namespace
}  // namespace lgtse::metrics
