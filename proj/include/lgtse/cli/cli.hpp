// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lgtse/common/error.hpp"
#include "lgtse/data/data.hpp"
#include "lgtse/training/training.hpp"

namespace lgtse::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kTrainingError = 3 };

int exit_code(ErrorKind kind);

// Entry point shared by the lgtse binary and the tests. Never throws.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args exclude argv[0]

// Settings a user can override from the environment or the command line.
// Unset fields leave the config file (or defaults) alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> condition;
  std::optional<double> w;
  std::optional<int> epochs;           // finetuning stages
  std::optional<int> pretrain_epochs;  // both pretraining stages
  std::optional<std::vector<std::string>> stages;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::int64_t> max_steps;
  std::optional<bool> tiny;

  // Fields present in `o` replace ours.
  void merge(const Overrides& o);
  // LGTSE_SEED, LGTSE_MODE, LGTSE_CONDITION, LGTSE_W, LGTSE_EPOCHS,
  // LGTSE_PRETRAIN_EPOCHS, LGTSE_STAGES, LGTSE_BATCH_SIZE, LGTSE_LR,
  // LGTSE_MAX_STEPS, LGTSE_TINY. Malformed values throw kUsage.
  static Overrides from_environment();
};

// Everything a command needs, serialized to the run directory before work
// starts. Section seeds derive from the global seed.
struct RunConfig {
  std::uint64_t seed = 0;
  bool tiny = false;
  data::SynthConfig corpus;
  data::PoolConfig pool;
  training::TrainConfig train;

  void apply(const Overrides& o);
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
};

// Defaults when no config file names stages: 40 + 40 pretraining epochs and
// 120 finetuning epochs; the tiny preset uses 2 + 2 + 2.
inline constexpr int kDefaultPretrainEpochs = 40;
inline constexpr int kDefaultFinetuneEpochs = 120;
inline constexpr int kTinyEpochs = 2;

// 4 speakers, 1 s clips, an 8-unit two-block backbone (< 10K parameters).
void apply_tiny_preset(RunConfig& c);

// file < environment < flags.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const Overrides& env, const Overrides& flags,
                         const RunConfig& base = {});

// Stable 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

// Exclusive per-directory lock held for the lifetime of the object. A lock
// left by a dead process is taken over with a warning; a live holder makes
// the constructor throw kIo.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;
  static constexpr const char* kFileName = ".lgtse.lock";

 private:
  std::filesystem::path path_;
};

}  // namespace lgtse::cli
