// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/signal/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "lgtse/common/error.hpp"

namespace lgtse::signal {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorKind::kIo, name + ": not a RIFF/WAVE file");

  int rate = 0;
  int channels = 0;
  int bits = 0;
  int format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    require(body + len <= bytes.size(), ErrorKind::kIo,
            name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require(len >= 16, ErrorKind::kIo, name + ": short fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = static_cast<int>(le32(bytes.data() + body + 4));
      bits = le16(bytes.data() + body + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  require(format == 1 && bits == 16, ErrorKind::kIo,
          name + ": only 16-bit PCM is supported");
  require(channels == 1, ErrorKind::kIo, name + ": only mono is supported");
  require(data != nullptr, ErrorKind::kIo, name + ": missing data chunk");
  if (expected_rate > 0) {
    require(rate == expected_rate, ErrorKind::kConfig,
            name + ": sample rate " + std::to_string(rate) +
                " does not match expected " + std::to_string(expected_rate));
  }

  const std::size_t n = data_len / 2;
  std::vector<double> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
    samples[i] = v / 32768.0;
  }
  return Waveform(std::move(samples), rate);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  require(w.sample_rate > 0, ErrorKind::kConfig, "sample_rate must be > 0");
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);  // PCM
  put16(out, 1);  // mono
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 2 * n);
  for (double v : w.samples) {
    const double c = std::clamp(v, -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<std::int16_t>(std::lround(c * 32768.0));
    put16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::kIo, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  require(f.good(), ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace lgtse::signal
