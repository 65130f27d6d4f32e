// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "lgtse/common/error.hpp"
#include "lgtse/signal/spectro.hpp"
#include "lgtse/signal/wav_io.hpp"
#include "support/test_support.hpp"

namespace lgtse::signal {
namespace {

using test::random_wave;

SpectroConfig cfg8k() { return SpectroConfig{}; }

double rel_l2_interior(const Waveform& a, const Waveform& b, std::size_t skip) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = skip; i + skip < a.size(); ++i) {
    num += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
    den += b.samples[i] * b.samples[i];
  }
  return std::sqrt(num / den);
}

// floor((8000 - 256) / 64) + 1 = 121 + 1 = 122 frames.
TEST(Stft, FrameCountForOneSecond) {
  const auto spec = stft(random_wave(8000, 1), cfg8k());
  EXPECT_EQ(spec.bins, 129);
  EXPECT_EQ(spec.frames(), 122);
  EXPECT_EQ(spec.data.rows(), 258);
  EXPECT_EQ(cfg8k().frames_for(8000), 122);
  EXPECT_EQ(cfg8k().frames_for(7999), 121);
  EXPECT_EQ(cfg8k().frames_for(255), 0);
}

TEST(Stft, ZeroInputGivesZeroSpectrum) {
  const auto spec = stft(Waveform(std::vector<double>(4000, 0.0), 8000), cfg8k());
  EXPECT_EQ(spec.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, ShortSignalIsLengthError) {
  try {
    stft(random_wave(255, 1), cfg8k());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLength);
  }
}

TEST(Stft, RateMismatchIsConfigError) {
  try {
    stft(random_wave(4000, 1, 16000), cfg8k());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

// A cosine on bin 20 concentrates its energy there; every bin matches a
// direct O(N^2) DFT of the windowed first frame.
TEST(Stft, CosineMatchesDirectDft) {
  const auto cfg = cfg8k();
  const int n = cfg.n_fft(), k0 = 20;
  std::vector<double> x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::cos(2.0 * std::numbers::pi * k0 * static_cast<double>(i) / n);
  }
  const auto spec = stft(Waveform(x, 8000), cfg);
  const auto win = analysis_window(cfg);
  for (int k = 0; k < spec.bins; ++k) {
    std::complex<double> acc = 0.0;
    for (int t = 0; t < n; ++t) {
      acc += win[t] * x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
    }
    EXPECT_NEAR(spec.data(k, 0), acc.real(), 1e-9);
    EXPECT_NEAR(spec.data(k + spec.bins, 0), acc.imag(), 1e-9);
  }
  Eigen::VectorXd power = (spec.real().array().square() + spec.imag().array().square())
                              .rowwise()
                              .sum();
  Eigen::Index arg;
  power.maxCoeff(&arg);
  EXPECT_EQ(arg, k0);
}

TEST(Stft, Linearity) {
  const auto x = random_wave(3000, 1), y = random_wave(3000, 2);
  std::vector<double> z(3000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = 0.7 * x.samples[i] - 1.3 * y.samples[i];
  const auto sx = stft(x, cfg8k()), sy = stft(y, cfg8k()), sz = stft(Waveform(z, 8000), cfg8k());
  EXPECT_LE((sz.data - (0.7 * sx.data - 1.3 * sy.data)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Istft, RoundTripInterior) {
  for (std::size_t n : {1024u, 4000u, 8000u, 10960u}) {
    const auto w = random_wave(n, n);
    const auto back = istft(stft(w, cfg8k()), cfg8k(), n);
    ASSERT_EQ(back.size(), n);
    EXPECT_LE(rel_l2_interior(back, w, 256), 1e-6) << n;
  }
}

TEST(Istft, HalfSecondNoiseMaxAbsError) {
  const auto w = random_wave(4000, 9, 8000, 0.5);
  const auto back = istft(stft(w, cfg8k()), cfg8k(), w.size());
  double worst = 0.0;
  // Frames cover [0, 3968); outside the first/last window the overlap is full.
  for (std::size_t i = 256; i < 3968 - 256; ++i) {
    worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Istft, ZeroSpectrumGivesZeroWave) {
  ComplexSpectrogram z{Eigen::MatrixXd::Zero(258, 30), 129, cfg8k()};
  const auto w = istft(z, cfg8k(), 2200);
  ASSERT_EQ(w.size(), 2200u);
  for (double v : w.samples) EXPECT_EQ(v, 0.0);
}

TEST(Istft, GeometryMismatchIsConfigError) {
  ComplexSpectrogram z{Eigen::MatrixXd::Zero(200, 30), 100, cfg8k()};
  try {
    istft(z, cfg8k(), 2000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

ComplexSpectrogram one_bin(double re, double im) {
  ComplexSpectrogram s{Eigen::MatrixXd::Zero(2, 1), 1, cfg8k()};
  s.data(0, 0) = re;
  s.data(1, 0) = im;
  return s;
}

TEST(Drc, Examples) {
  auto c = drc_compress(one_bin(4, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.data(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(c.data(1, 0), 0.0);
  auto e = drc_expand(one_bin(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(e.data(0, 0), 4.0);
  for (auto f : {drc_compress(one_bin(0, 0), 0.5), drc_expand(one_bin(0, 0), 0.5)}) {
    EXPECT_EQ(f.data(0, 0), 0.0);
    EXPECT_EQ(f.data(1, 0), 0.0);
  }
}

TEST(Drc, BetaOneIsIdentity) {
  const auto s = stft(random_wave(2000, 3), cfg8k());
  EXPECT_LE((drc_compress(s, 1.0).data - s.data).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Drc, InverseAndPhase) {
  const auto s = stft(random_wave(4000, 4), cfg8k());
  const auto c = drc_compress(s, 0.5);
  const auto back = drc_expand(c, 0.5);
  const auto again = drc_compress(drc_expand(s, 0.5), 0.5);
  double worst = 0.0, worst_phase = 0.0;
  for (long t = 0; t < s.data.cols(); ++t) {
    for (int k = 0; k < s.bins; ++k) {
      const std::complex<double> x(s.data(k, t), s.data(k + s.bins, t));
      const std::complex<double> y(back.data(k, t), back.data(k + s.bins, t));
      const std::complex<double> z(again.data(k, t), again.data(k + s.bins, t));
      const std::complex<double> p(c.data(k, t), c.data(k + s.bins, t));
      if (std::abs(x) == 0.0) continue;
      worst = std::max({worst, std::abs(y - x) / std::abs(x), std::abs(z - x) / std::abs(x)});
      worst_phase = std::max(worst_phase, std::abs(std::arg(p / x)));
    }
  }
  EXPECT_LE(worst, 1e-9);
  EXPECT_LE(worst_phase, 1e-9);
}

TEST(MagnitudePower, ZeroBinHasZeroGradient) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 2);
  z(0, 1) = 3.0;
  z(2, 1) = 4.0;
  Eigen::MatrixXd g = Eigen::MatrixXd::Ones(4, 2);
  const auto vjp = magnitude_power_vjp(z, 0.5, g);
  EXPECT_EQ(vjp(0, 0), 0.0);
  EXPECT_EQ(vjp(2, 0), 0.0);
  EXPECT_TRUE(vjp.allFinite());
}

TEST(WavIo, Pcm16RoundTrip) {
  test::TempDir dir;
  auto w = random_wave(1234, 5, 8000, 0.2);
  write_wav(dir / "x.wav", w);
  const auto r = read_wav(dir / "x.wav", 8000);
  ASSERT_EQ(r.size(), w.size());
  EXPECT_EQ(r.sample_rate, 8000);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768.0);
  }
  try {
    read_wav(dir / "x.wav", 16000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

}  // namespace
}  // namespace lgtse::signal
