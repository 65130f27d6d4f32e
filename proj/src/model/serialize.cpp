// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/model/serialize.hpp"

#include <bit>
#include <fstream>

#include "lgtse/common/error.hpp"

namespace lgtse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace signal {

void to_json(json& j, const SpectroConfig& c) {
  j = {{"sample_rate", c.sample_rate},
       {"win_ms", c.win_ms},
       {"hop_ms", c.hop_ms},
       {"window", "hann"},
       {"beta", c.beta}};
}

void from_json(const json& j, SpectroConfig& c) {
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.win_ms = j.value("win_ms", c.win_ms);
  c.hop_ms = j.value("hop_ms", c.hop_ms);
  c.beta = j.value("beta", c.beta);
  require(j.value("window", std::string("hann")) == "hann", ErrorKind::kConfig,
          "only the hann window is supported");
}

}  // namespace signal

namespace model {

static_assert(std::endian::native == std::endian::little,
              "parameter files are little-endian");

void to_json(json& j, const ModelConfig& c) {
  j = {{"spectro", c.spectro},
       {"denoiser", {{"hidden", c.denoiser.hidden}, {"kernel", c.denoiser.kernel}}},
       {"backbone",
        {{"hidden", c.backbone.hidden},
         {"blocks", c.backbone.blocks},
         {"kernel", c.backbone.kernel},
         {"fusion", c.backbone.fusion == FusionMode::kConcat ? "concat"
                                                             : "concat_magnitude"},
         {"input",
          c.backbone.input == BackboneInput::kNoisy ? "noisy" : "denoised"}}},
       {"attn_scale", c.attn_scale},
       {"init", c.init == InitMode::kIdentity ? "identity" : "random"},
       {"seed", c.seed},
       {"denoiser_budget", c.denoiser_budget}};
}

void from_json(const json& j, ModelConfig& c) {
  if (j.contains("spectro")) c.spectro = j.at("spectro").get<signal::SpectroConfig>();
  if (j.contains("denoiser")) {
    const json& d = j.at("denoiser");
    c.denoiser.hidden = d.value("hidden", c.denoiser.hidden);
    c.denoiser.kernel = d.value("kernel", c.denoiser.kernel);
  }
  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    c.backbone.hidden = b.value("hidden", c.backbone.hidden);
    c.backbone.blocks = b.value("blocks", c.backbone.blocks);
    c.backbone.kernel = b.value("kernel", c.backbone.kernel);
    const std::string fusion = b.value("fusion", std::string("concat_magnitude"));
    require(fusion == "concat" || fusion == "concat_magnitude", ErrorKind::kConfig,
            "backbone.fusion must be concat or concat_magnitude");
    c.backbone.fusion =
        fusion == "concat" ? FusionMode::kConcat : FusionMode::kConcatMagnitude;
    const std::string input = b.value("input", std::string("denoised"));
    require(input == "noisy" || input == "denoised", ErrorKind::kConfig,
            "backbone.input must be noisy or denoised");
    c.backbone.input =
        input == "noisy" ? BackboneInput::kNoisy : BackboneInput::kDenoised;
  }
  c.attn_scale = j.value("attn_scale", c.attn_scale);
  const std::string init = j.value("init", std::string("identity"));
  require(init == "identity" || init == "random", ErrorKind::kConfig,
          "init must be identity or random");
  c.init = init == "identity" ? InitMode::kIdentity : InitMode::kRandom;
  c.seed = j.value("seed", c.seed);
  c.denoiser_budget = j.value("denoiser_budget", c.denoiser_budget);
}

json parameter_table(const ad::ParameterStore& store) {
  json t = json::array();
  for (const auto& p : store.all()) {
    t.push_back({{"name", p.name},
                 {"group", ad::to_string(p.group)},
                 {"rows", p.value.rows()},
                 {"cols", p.value.cols()}});
  }
  return t;
}

void write_matrices(std::ostream& out, const std::vector<ad::Matrix>& ms) {
  for (const auto& m : ms) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed");
}

void read_matrices(std::istream& in, std::vector<ad::Matrix>& ms) {
  for (auto& m : ms) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    require(in.gcount() == static_cast<std::streamsize>(m.size() * sizeof(double)),
            ErrorKind::kIo, "array file is shorter than its shape table");
  }
  in.peek();
  require(in.eof(), ErrorKind::kIo, "array file is longer than its shape table");
}

void write_parameters(const fs::path& path, const ad::ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& p : store.all()) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

void read_parameters(const fs::path& path, ad::ParameterStore& store,
                     const json* table) {
  if (table) {
    require(table->is_array() && table->size() == store.size(), ErrorKind::kIo,
            "checkpoint parameter table does not match the architecture");
    for (std::size_t i = 0; i < store.size(); ++i) {
      const json& e = (*table)[i];
      const auto& p = store[i];
      require(e.at("name") == p.name && e.at("rows") == p.value.rows() &&
                  e.at("cols") == p.value.cols(),
              ErrorKind::kIo,
              "checkpoint parameter " + e.at("name").get<std::string>() +
                  " does not match " + p.name);
    }
  }
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + path.string());
  std::vector<ad::Matrix> ms;
  for (const auto& p : store.all()) ms.push_back(p.value);
  read_matrices(in, ms);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value = std::move(ms[i]);
}

void save_model(const LgtseModel& m, const fs::path& dir, const json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create " + dir.string());
  json man = extra;
  man["format"] = kCheckpointFormat;
  man["version"] = kCheckpointVersion;
  man["model"] = m.config();
  man["parameters"] = parameter_table(m.parameters());
  write_parameters(dir / "params.bin", m.parameters());
  std::ofstream out(dir / "manifest.json");
  out << man.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::kIo,
          "cannot write " + (dir / "manifest.json").string());
}

LgtseModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  require(static_cast<bool>(in), ErrorKind::kIo,
          "checkpoint manifest not found: " + (dir / "manifest.json").string());
  json man;
  try {
    man = json::parse(in);
  } catch (const json::exception& e) {
    raise(ErrorKind::kIo, "malformed checkpoint manifest: " + std::string(e.what()));
  }
  require(man.value("format", "") == kCheckpointFormat, ErrorKind::kIo,
          "not an lgtse checkpoint: " + dir.string());
  const std::string version = man.value("version", "");
  require(version.substr(0, version.find('.')) ==
              std::string(kCheckpointVersion).substr(0, 1),
          ErrorKind::kIo, "unsupported checkpoint version " + version);
  LgtseModel m(man.at("model").get<ModelConfig>());
  const json table = man.at("parameters");
  read_parameters(dir / "params.bin", m.parameters(), &table);
  return m;
}

}  // namespace model
}  // namespace lgtse
