// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "lgtse/common/error.hpp"
#include "lgtse/data/data.hpp"
#include "lgtse/signal/wav_io.hpp"

namespace lgtse::data {

namespace fs = std::filesystem;
using signal::read_wav;
using signal::write_wav;
using nlohmann::json;

namespace {

constexpr const char* kIndexFormat = "lgtse-corpus/1";

std::string clip_path(const SourceClip& c) {
  char buf[32];
  if (c.kind == ClipKind::kNoise) {
    std::snprintf(buf, sizeof(buf), "noise/%04d.wav", c.utterance);
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "/%03d.wav", c.utterance);
  return "speech/" + c.speaker_id + buf;
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "speech", ec);
  fs::create_directories(dir / "noise", ec);
  require(!ec, ErrorKind::kIo, "cannot create corpus directory " + dir.string());

  const SynthConfig& c = corpus.config;
  json idx;
  idx["format"] = kIndexFormat;
  idx["config"] = {{"n_speakers", c.n_speakers},
                   {"utts_per_speaker", c.utts_per_speaker},
                   {"duration_s", c.duration_s},
                   {"sample_rate", c.sample_rate},
                   {"seed", c.seed},
                   {"noise_clips", c.noise_clips}};
  idx["f0_hz"] = corpus.f0;
  json clips = json::array();
  for (const auto* group : {&corpus.speech, &corpus.noise}) {
    for (const SourceClip& clip : *group) {
      fs::create_directories((dir / clip_path(clip)).parent_path(), ec);
      write_wav(dir / clip_path(clip), clip.waveform);
      clips.push_back({{"path", clip_path(clip)},
                       {"kind", clip.kind == ClipKind::kNoise ? "noise" : "speech"},
                       {"speaker", clip.speaker_id},
                       {"utterance", clip.utterance},
                       {"samples", clip.waveform.size()}});
    }
  }
  idx["clips"] = std::move(clips);
  std::ofstream out(dir / "index.json");
  out << idx.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::kIo,
          "cannot write " + (dir / "index.json").string());
}

Corpus load_corpus(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  require(static_cast<bool>(in), ErrorKind::kIo,
          "corpus index not found: " + (dir / "index.json").string());
  json idx;
  try {
    idx = json::parse(in);
  } catch (const json::exception& e) {
    raise(ErrorKind::kIo, "malformed corpus index: " + std::string(e.what()));
  }
  require(idx.value("format", "") == kIndexFormat, ErrorKind::kIo,
          "unsupported corpus index format");
  Corpus corpus;
  const json& c = idx.at("config");
  corpus.config.n_speakers = c.at("n_speakers");
  corpus.config.utts_per_speaker = c.at("utts_per_speaker");
  corpus.config.duration_s = c.at("duration_s");
  corpus.config.sample_rate = c.at("sample_rate");
  corpus.config.seed = c.at("seed");
  corpus.config.noise_clips = c.at("noise_clips");
  corpus.config.validate();
  corpus.f0 = idx.at("f0_hz").get<std::vector<double>>();
  for (const json& j : idx.at("clips")) {
    SourceClip clip;
    clip.kind = j.at("kind") == "noise" ? ClipKind::kNoise : ClipKind::kSpeech;
    clip.speaker_id = j.at("speaker");
    clip.utterance = j.at("utterance");
    clip.waveform =
        read_wav(dir / j.at("path").get<std::string>(), corpus.config.sample_rate);
    (clip.kind == ClipKind::kNoise ? corpus.noise : corpus.speech)
        .push_back(std::move(clip));
  }
  require(corpus.speech.size() ==
              static_cast<std::size_t>(corpus.config.n_speakers *
                                       corpus.config.utts_per_speaker),
          ErrorKind::kValidation, "corpus index lists the wrong clip count");
  return corpus;
}

}  // namespace lgtse::data
