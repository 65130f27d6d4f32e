// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Serial reference vs OpenMP kernels on model-sized inputs. Thread count
// follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lgtse/kernels/nn.hpp"
#include "lgtse/kernels/spectral.hpp"
#include "lgtse/signal/spectro.hpp"

namespace {

using namespace lgtse;

Eigen::MatrixXd random_matrix(long rows, long cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

std::vector<double> random_signal(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.1);
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

// state.range(0): signal length in seconds at 8 kHz.
struct Spectral {
  signal::SpectroConfig cfg;
  signal::RealFft fft{cfg.n_fft()};
  std::vector<double> window = signal::analysis_window(cfg);
  std::vector<double> scale = std::vector<double>(cfg.bins(), 1.0);
  std::vector<double> x;
  int frames;
  explicit Spectral(int seconds)
      : x(random_signal(8000u * seconds, 1)), frames(cfg.frames_for(x.size())) {}
};

template <auto Fn>
void BM_analyze(benchmark::State& state) {
  Spectral s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Fn(s.x, s.window, s.fft, s.cfg.hop_length(), s.frames));
  }
  state.SetItemsProcessed(state.iterations() * s.frames);
}

template <auto Fn>
void BM_synthesize(benchmark::State& state) {
  Spectral s(static_cast<int>(state.range(0)));
  const Eigen::MatrixXd spec =
      kernels::serial::analyze_frames(s.x, s.window, s.fft, s.cfg.hop_length(), s.frames);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(spec, s.window, s.fft, s.scale));
  state.SetItemsProcessed(state.iterations() * s.frames);
}

template <auto Fn>
void BM_overlap_add(benchmark::State& state) {
  Spectral s(static_cast<int>(state.range(0)));
  const Eigen::MatrixXd frames = random_matrix(s.cfg.n_fft(), s.frames, 2);
  std::vector<double> out(s.x.size());
  for (auto _ : state) {
    Fn(frames, s.cfg.hop_length(), out);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * s.frames);
}

// Attention logits: [Te x Ty] for Te = Ty = range(0) frames.
template <auto Fn>
void BM_softmax(benchmark::State& state) {
  const Eigen::MatrixXd logits = random_matrix(state.range(0), state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(logits));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// 64 channels, kernel 3, dilation 2, range(0) frames.
template <auto Fn>
void BM_im2col(benchmark::State& state) {
  const Eigen::MatrixXd x = random_matrix(64, state.range(0), 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, 3, 2));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// [2F x T] with F = 129.
template <auto Fn>
void BM_complex_mul(benchmark::State& state) {
  const Eigen::MatrixXd a = random_matrix(258, state.range(0), 5);
  const Eigen::MatrixXd b = random_matrix(258, state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

using Ms = benchmark::internal::Benchmark;
void seconds(Ms* b) { b->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMicrosecond); }
void frames(Ms* b) { b->Arg(122)->Arg(497)->Arg(1997)->Unit(benchmark::kMicrosecond); }

BENCHMARK(BM_analyze<kernels::serial::analyze_frames>)->Name("analyze_frames/serial")->Apply(seconds);
BENCHMARK(BM_analyze<kernels::omp::analyze_frames>)->Name("analyze_frames/omp")->Apply(seconds);
BENCHMARK(BM_synthesize<kernels::serial::synthesize_frames>)->Name("synthesize_frames/serial")->Apply(seconds);
BENCHMARK(BM_synthesize<kernels::omp::synthesize_frames>)->Name("synthesize_frames/omp")->Apply(seconds);
BENCHMARK(BM_overlap_add<kernels::serial::overlap_add>)->Name("overlap_add/serial")->Apply(seconds);
BENCHMARK(BM_overlap_add<kernels::omp::overlap_add>)->Name("overlap_add/omp")->Apply(seconds);
BENCHMARK(BM_softmax<kernels::serial::softmax_cols>)->Name("softmax_cols/serial")->Apply(frames);
BENCHMARK(BM_softmax<kernels::omp::softmax_cols>)->Name("softmax_cols/omp")->Apply(frames);
BENCHMARK(BM_im2col<kernels::serial::im2col_causal>)->Name("im2col_causal/serial")->Apply(frames);
BENCHMARK(BM_im2col<kernels::omp::im2col_causal>)->Name("im2col_causal/omp")->Apply(frames);
BENCHMARK(BM_complex_mul<kernels::serial::complex_mul>)->Name("complex_mul/serial")->Apply(frames);
BENCHMARK(BM_complex_mul<kernels::omp::complex_mul>)->Name("complex_mul/omp")->Apply(frames);

}  // namespace

BENCHMARK_MAIN();
