// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/common/condition.hpp"

namespace lgtse {

std::string_view label(Condition c) {
  switch (c) {
    case Condition::kSingleNoise: return "1spk+noise";
    case Condition::kTwoSpeaker: return "2spk";
    case Condition::kTwoSpeakerNoise: return "2spk+noise";
  }
  return "?";
}

std::string_view libri2mix_name(Condition c) {
  switch (c) {
    case Condition::kSingleNoise: return "mix_single";
    case Condition::kTwoSpeaker: return "mix_clean";
    case Condition::kTwoSpeakerNoise: return "mix_both";
  }
  return "?";
}

std::optional<Condition> parse_condition(std::string_view s) {
  for (Condition c : kAllConditions) {
    if (s == label(c) || s == libri2mix_name(c)) return c;
  }
  if (s == "single" || s == "1spk") return Condition::kSingleNoise;
  if (s == "clean") return Condition::kTwoSpeaker;
  if (s == "both") return Condition::kTwoSpeakerNoise;
  return std::nullopt;
}

std::string_view mode_name(TrainingMode::Kind k) {
  switch (k) {
    case TrainingMode::Kind::kConditionWise: return "condition-wise";
    case TrainingMode::Kind::kTripleC: return "triplec";
    case TrainingMode::Kind::kTripleCParallel: return "triplec-parallel";
    case TrainingMode::Kind::kShuffled: return "shuffled";
  }
  return "?";
}

std::optional<TrainingMode::Kind> parse_mode_kind(std::string_view s) {
  for (auto k : {TrainingMode::Kind::kConditionWise, TrainingMode::Kind::kTripleC,
                 TrainingMode::Kind::kTripleCParallel,
                 TrainingMode::Kind::kShuffled}) {
    if (s == mode_name(k)) return k;
  }
  return std::nullopt;
}

std::string describe(const TrainingMode& m) {
  std::string s(mode_name(m.kind));
  if (m.kind == TrainingMode::Kind::kConditionWise) {
    s += "(" + std::string(label(m.condition)) + ")";
  }
  return s;
}

}  // namespace lgtse
