// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace lgtse {

// Interference scenario of a mixture.
enum class Condition {
  kSingleNoise = 0,      // target + noise
  kTwoSpeaker = 1,       // target + interfering speaker
  kTwoSpeakerNoise = 2,  // target + interfering speaker + noise
};

inline constexpr std::array<Condition, 3> kAllConditions = {
    Condition::kSingleNoise, Condition::kTwoSpeaker,
    Condition::kTwoSpeakerNoise};

// "1spk+noise", "2spk", "2spk+noise".
std::string_view label(Condition c);
// Libri2Mix directory names: mix_single, mix_clean, mix_both.
std::string_view libri2mix_name(Condition c);
// Accepts labels, Libri2Mix names and a few aliases ("single", "clean",
// "both"). Returns nullopt for anything else.
std::optional<Condition> parse_condition(std::string_view s);

inline std::size_t index(Condition c) { return static_cast<std::size_t>(c); }

// How training batches are organized and which loss terms apply.
struct TrainingMode {
  enum class Kind { kConditionWise, kTripleC, kTripleCParallel, kShuffled };
  Kind kind = Kind::kTripleCParallel;
  Condition condition = Condition::kTwoSpeakerNoise;  // condition-wise only

  static TrainingMode condition_wise(Condition c) {
    return {Kind::kConditionWise, c};
  }
  static TrainingMode triplec() { return {Kind::kTripleC, {}}; }
  static TrainingMode triplec_parallel() {
    return {Kind::kTripleCParallel, {}};
  }
  static TrainingMode shuffled() { return {Kind::kShuffled, {}}; }

  bool uses_consistency() const {
    return kind == Kind::kTripleC || kind == Kind::kTripleCParallel;
  }
  bool operator==(const TrainingMode& o) const {
    return kind == o.kind &&
           (kind != Kind::kConditionWise || condition == o.condition);
  }
};

// "condition-wise", "triplec", "triplec-parallel", "shuffled".
std::string_view mode_name(TrainingMode::Kind k);
std::optional<TrainingMode::Kind> parse_mode_kind(std::string_view s);
std::string describe(const TrainingMode& m);

}  // namespace lgtse
