// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "lgtse/model/lgtse_model.hpp"

namespace lgtse {
namespace signal {
void to_json(nlohmann::json& j, const SpectroConfig& c);
void from_json(const nlohmann::json& j, SpectroConfig& c);
}  // namespace signal

namespace model {
void to_json(nlohmann::json& j, const ModelConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

// Shape table written next to raw parameter arrays.
nlohmann::json parameter_table(const ad::ParameterStore& store);

// Raw little-endian float64 arrays in store order (column-major per array).
void write_parameters(const std::filesystem::path& path,
                      const ad::ParameterStore& store);
// Throws kIo on size mismatch; `table` (when given) must match the store's
// names and shapes.
void read_parameters(const std::filesystem::path& path, ad::ParameterStore& store,
                     const nlohmann::json* table = nullptr);

// Binary helpers shared with optimizer state files.
void write_matrices(std::ostream& out, const std::vector<ad::Matrix>& ms);
void read_matrices(std::istream& in, std::vector<ad::Matrix>& ms);

// Model-only checkpoint: manifest.json + params.bin in `dir`.
void save_model(const LgtseModel& m, const std::filesystem::path& dir,
                const nlohmann::json& extra = nlohmann::json::object());
LgtseModel load_model(const std::filesystem::path& dir);

inline constexpr const char* kCheckpointFormat = "lgtse-checkpoint";
inline constexpr const char* kCheckpointVersion = "1.0";

}  // namespace model
}  // namespace lgtse
