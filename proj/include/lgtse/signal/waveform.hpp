// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

namespace lgtse {

// Mono time-domain signal. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }

  // Throws kValidation on non-finite samples or a non-positive rate.
  void validate() const;

  Waveform truncated(std::size_t n) const;
  double energy() const;
};

}  // namespace lgtse
