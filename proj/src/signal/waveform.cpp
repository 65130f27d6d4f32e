// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/signal/waveform.hpp"

#include <cmath>

#include "lgtse/common/error.hpp"

namespace lgtse {

void Waveform::validate() const {
  require(sample_rate > 0, ErrorKind::kValidation, "sample_rate must be > 0");
  for (double v : samples) {
    require(std::isfinite(v), ErrorKind::kValidation,
            "waveform contains non-finite samples");
  }
}

Waveform Waveform::truncated(std::size_t n) const {
  require(n <= samples.size(), ErrorKind::kLength,
          "cannot truncate to a longer length");
  return Waveform(std::vector<double>(samples.begin(), samples.begin() + n),
                  sample_rate);
}

double Waveform::energy() const {
  double e = 0.0;
  for (double v : samples) e += v * v;
  return e;
}

}  // namespace lgtse
