// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <spdlog/spdlog.h>

#include "lgtse/cli/cli.hpp"
#include "lgtse/common/seed.hpp"
#include "lgtse/model/serialize.hpp"

namespace lgtse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return kUsageError;
    case ErrorKind::kTraining:
      return kTrainingError;
    default:
      return kDataError;
  }
}

// ---- overrides ----

void Overrides::merge(const Overrides& o) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(seed, o.seed);
  take(mode, o.mode);
  take(condition, o.condition);
  take(w, o.w);
  take(epochs, o.epochs);
  take(pretrain_epochs, o.pretrain_epochs);
  take(stages, o.stages);
  take(batch_size, o.batch_size);
  take(lr, o.lr);
  take(max_steps, o.max_steps);
  take(tiny, o.tiny);
}

namespace {

template <class T>
std::optional<T> env_number(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      out = static_cast<T>(std::stoll(v, &used));
    }
    if (used == std::string(v).size()) return out;
  } catch (const std::exception&) {
  }
  raise(ErrorKind::kUsage, std::string("malformed ") + name + "='" + v + "'");
}

std::optional<std::string> env_string(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

Overrides Overrides::from_environment() {
  Overrides o;
  o.seed = env_number<std::uint64_t>("LGTSE_SEED");
  o.mode = env_string("LGTSE_MODE");
  o.condition = env_string("LGTSE_CONDITION");
  o.w = env_number<double>("LGTSE_W");
  o.epochs = env_number<int>("LGTSE_EPOCHS");
  o.pretrain_epochs = env_number<int>("LGTSE_PRETRAIN_EPOCHS");
  if (auto s = env_string("LGTSE_STAGES")) o.stages = split_list(*s);
  o.batch_size = env_number<std::size_t>("LGTSE_BATCH_SIZE");
  o.lr = env_number<double>("LGTSE_LR");
  o.max_steps = env_number<std::int64_t>("LGTSE_MAX_STEPS");
  if (auto t = env_string("LGTSE_TINY")) {
    require(*t == "0" || *t == "1", ErrorKind::kUsage, "LGTSE_TINY must be 0 or 1");
    o.tiny = *t == "1";
  }
  return o;
}

// ---- run config ----

void apply_tiny_preset(RunConfig& c) {
  c.tiny = true;
  c.corpus.n_speakers = 4;
  c.corpus.duration_s = 1.0;
  c.corpus.sample_rate = 8000;
  auto& m = c.train.model;
  m.backbone.hidden = 8;
  m.backbone.blocks = 2;
  m.denoiser.hidden = 16;
  for (auto& s : c.train.stages) s.epochs = std::min(s.epochs, kTinyEpochs);
}

void RunConfig::apply(const Overrides& o) {
  if (o.seed) seed = *o.seed;
  if (o.tiny.value_or(false) && !tiny) apply_tiny_preset(*this);
  auto& stages = train.stages;

  if (o.stages) {
    require(!o.stages->empty(), ErrorKind::kUsage, "--stages needs at least one stage");
    std::vector<training::StageConfig> picked;
    const auto mode = stages.empty() ? TrainingMode::triplec_parallel() : stages[0].mode;
    const double w = stages.empty() ? losses::kDefaultConsistencyWeight : stages[0].w;
    for (const auto& name : *o.stages) {
      const auto st = training::parse_stage(name);
      require(st.has_value(), ErrorKind::kUsage,
              "unknown stage '" + name +
                  "' (expected pretrain_denoiser, pretrain_backbone or finetune_joint)");
      auto it = std::find_if(stages.begin(), stages.end(),
                             [&](const auto& s) { return s.stage == *st; });
      picked.push_back(it != stages.end()
                           ? *it
                           : training::StageConfig{*st, mode, w,
                                                   tiny ? kTinyEpochs
                                                        : kDefaultFinetuneEpochs});
    }
    stages = std::move(picked);
  }

  if (o.mode) {
    const auto kind = parse_mode_kind(*o.mode);
    require(kind.has_value(), ErrorKind::kUsage,
            "invalid mode '" + *o.mode +
                "'; valid modes: condition-wise, triplec, triplec-parallel, shuffled");
    TrainingMode m{*kind, Condition::kTwoSpeakerNoise};
    if (*kind == TrainingMode::Kind::kConditionWise) {
      require(o.condition.has_value(), ErrorKind::kUsage,
              "--mode condition-wise requires --condition "
              "(1spk+noise, 2spk or 2spk+noise)");
    }
    for (auto& s : stages) s.mode = m;
  }
  if (o.condition) {
    const auto c = parse_condition(*o.condition);
    require(c.has_value(), ErrorKind::kUsage,
            "invalid condition '" + *o.condition +
                "'; valid conditions: 1spk+noise, 2spk, 2spk+noise");
    for (auto& s : stages) {
      require(s.mode.kind == TrainingMode::Kind::kConditionWise, ErrorKind::kUsage,
              "--condition only applies to --mode condition-wise");
      s.mode.condition = *c;
    }
  }
  if (o.w) {
    for (auto& s : stages) s.w = *o.w;
  }
  for (auto& s : stages) {
    const bool pre = s.stage != training::Stage::kFinetuneJoint;
    if (pre && o.pretrain_epochs) s.epochs = *o.pretrain_epochs;
    if (!pre && o.epochs) s.epochs = *o.epochs;
  }
  if (o.batch_size) train.batch_size = *o.batch_size;
  if (o.lr) train.schedule.lr0 = *o.lr;
  if (o.max_steps) train.max_steps_per_stage = *o.max_steps;

  // Section seeds are derived so one number reproduces a run.
  corpus.seed = seed;
  pool.seed = derive_seed(seed, {1});
  train.seed = derive_seed(seed, {2});
  train.model.seed = derive_seed(seed, {3});
}

json RunConfig::to_json() const {
  return {{"seed", seed},
          {"tiny", tiny},
          {"corpus",
           {{"n_speakers", corpus.n_speakers},
            {"utts_per_speaker", corpus.utts_per_speaker},
            {"duration_s", corpus.duration_s},
            {"sample_rate", corpus.sample_rate},
            {"noise_clips", corpus.noise_clips}}},
          {"pool",
           {{"enroll_s", pool.enroll_s},
            {"heldout_utts", pool.heldout_utts},
            {"sir_min_db", pool.sir_min_db},
            {"sir_max_db", pool.sir_max_db},
            {"snr_min_db", pool.snr_min_db},
            {"snr_max_db", pool.snr_max_db}}},
          {"train", json(train)}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.tiny = j.value("tiny", c.tiny);
    if (j.contains("corpus")) {
      const json& s = j.at("corpus");
      c.corpus.n_speakers = s.value("n_speakers", c.corpus.n_speakers);
      c.corpus.utts_per_speaker = s.value("utts_per_speaker", c.corpus.utts_per_speaker);
      c.corpus.duration_s = s.value("duration_s", c.corpus.duration_s);
      c.corpus.sample_rate = s.value("sample_rate", c.corpus.sample_rate);
      c.corpus.noise_clips = s.value("noise_clips", c.corpus.noise_clips);
    }
    if (j.contains("pool")) {
      const json& s = j.at("pool");
      c.pool.enroll_s = s.value("enroll_s", c.pool.enroll_s);
      c.pool.heldout_utts = s.value("heldout_utts", c.pool.heldout_utts);
      c.pool.sir_min_db = s.value("sir_min_db", c.pool.sir_min_db);
      c.pool.sir_max_db = s.value("sir_max_db", c.pool.sir_max_db);
      c.pool.snr_min_db = s.value("snr_min_db", c.pool.snr_min_db);
      c.pool.snr_max_db = s.value("snr_max_db", c.pool.snr_max_db);
    }
    if (j.contains("train")) training::from_json(j.at("train"), c.train);
  } catch (const json::exception& e) {
    raise(ErrorKind::kConfig, std::string("bad config: ") + e.what());
  }
  return c;
}

RunConfig resolve_config(const std::optional<fs::path>& file, const Overrides& env,
                         const Overrides& flags, const RunConfig& base) {
  RunConfig c = base;
  if (c.train.stages.empty()) {
    c.train.stages = training::default_stages(TrainingMode::triplec_parallel(),
                                              losses::kDefaultConsistencyWeight,
                                              kDefaultPretrainEpochs,
                                              kDefaultFinetuneEpochs);
  }
  if (file) {
    std::ifstream in(*file);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot read config " + file->string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      raise(ErrorKind::kConfig, "config " + file->string() + ": " + e.what());
    }
    const bool had_stages = j.contains("train") && j["train"].contains("stages") &&
                            !j["train"]["stages"].empty();
    const auto stages = c.train.stages;
    c = RunConfig::from_json(j);
    if (!had_stages) c.train.stages = stages;
    if (c.tiny) apply_tiny_preset(c);
  }
  Overrides o = env;
  o.merge(flags);
  c.apply(o);
  return c;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- lock ----

DirLock::DirLock(const fs::path& dir) : path_(dir / kFileName) {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const ssize_t n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      require(n == static_cast<ssize_t>(pid.size()), ErrorKind::kIo,
              "cannot write lock file " + path_.string());
      return;
    }
    require(errno == EEXIST, ErrorKind::kIo, "cannot create lock file " + path_.string());
    long holder = 0;
    std::ifstream(path_) >> holder;
    if (holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM)) {
      raise(ErrorKind::kIo, dir.string() + " is locked by running process " +
                                std::to_string(holder) + " (" + path_.string() + ")");
    }
    spdlog::warn("removing stale lock {} (process {} is gone)", path_.string(), holder);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  raise(ErrorKind::kIo, "cannot acquire " + path_.string());
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace lgtse::cli
