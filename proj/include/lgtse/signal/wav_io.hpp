// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>

#include "lgtse/signal/waveform.hpp"

namespace lgtse::signal {

// 16-bit PCM mono WAV. Reading rejects other encodings and channel counts;
// when expected_rate > 0 the header rate must match it.
Waveform read_wav(const std::filesystem::path& path, int expected_rate = 0);

// Samples are clipped to [-1, 1] and rounded to the nearest 16-bit level.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace lgtse::signal
