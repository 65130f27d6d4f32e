// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <spdlog/spdlog.h>

#include "lgtse/common/error.hpp"
#include "lgtse/data/data.hpp"
#include "lgtse/signal/wav_io.hpp"

namespace lgtse::data {

namespace fs = std::filesystem;
using signal::read_wav;

namespace {

// RFC 4180 field splitting (quoted fields, doubled quotes).
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  return out;
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && ws(s[b])) ++b;
  return s.substr(b);
}

// Libri2Mix file stems look like "<spk>-<chapter>-<utt>_<spk>-<chapter>-<utt>".
std::pair<std::string, std::string> speakers_from_stem(const fs::path& p) {
  const std::string stem = p.stem().string();
  const auto us = stem.find('_');
  if (us == std::string::npos) return {};
  const std::string a = stem.substr(0, stem.find('-'));
  const std::string rest = stem.substr(us + 1);
  const std::string b = rest.substr(0, rest.find('-'));
  if (a.empty() || b.empty() || a == stem.substr(0, us)) return {};
  return {a, b};
}

struct Row {
  std::size_t line;
  Condition condition;
  fs::path mixture;
};

struct Group {
  fs::path source1, enrollment;
  int rate = 0;
  std::vector<Row> rows;
};

}  // namespace

ManifestLoad load_libri2mix_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo,
          "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  ManifestLoad result;
  std::string line;
  if (!std::getline(in, line)) return result;  // empty manifest
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* name : {"condition", "mixture_path", "source1_path",
                           "enrollment_path", "noise_path", "sample_rate"}) {
    require(col.count(name) > 0, ErrorKind::kIo,
            "manifest header lacks column '" + std::string(name) + "'");
  }

  std::map<std::pair<std::string, std::string>, Group> groups;
  std::vector<std::pair<std::string, std::string>> order;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    auto reject = [&](const std::string& why) {
      result.rejected.push_back({lineno, why});
    };
    if (f.size() < header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, got " +
             std::to_string(f.size()));
      continue;
    }
    auto field = [&](const char* name) { return trim(f[col[name]]); };
    const auto cond = parse_condition(field("condition"));
    if (!cond) {
      reject("unknown condition '" + field("condition") + "'");
      continue;
    }
    int rate = 0;
    try {
      rate = std::stoi(field("sample_rate"));
    } catch (const std::exception&) {
    }
    if (rate <= 0) {
      reject("invalid sample_rate '" + field("sample_rate") + "'");
      continue;
    }
    const fs::path mix = resolve(field("mixture_path"));
    const fs::path s1 = resolve(field("source1_path"));
    const fs::path en = resolve(field("enrollment_path"));
    bool missing = false;
    for (const fs::path& p : {mix, s1, en}) {
      if (!fs::is_regular_file(p)) {
        reject("missing file " + p.string());
        missing = true;
        break;
      }
    }
    if (missing) continue;
    if (!field("noise_path").empty() &&
        !fs::is_regular_file(resolve(field("noise_path")))) {
      reject("missing file " + resolve(field("noise_path")).string());
      continue;
    }
    const auto key = std::make_pair(s1.string(), en.string());
    auto it = groups.find(key);
    if (it == groups.end()) {
      it = groups.emplace(key, Group{s1, en, rate, {}}).first;
      order.push_back(key);
    }
    Group& g = it->second;
    if (g.rate != rate) {
      reject("sample_rate differs from other rows of the same target");
      continue;
    }
    const bool dup = std::any_of(g.rows.begin(), g.rows.end(), [&](const Row& r) {
      return r.condition == *cond;
    });
    if (dup) {
      reject("duplicate " + std::string(label(*cond)) + " row for target");
      continue;
    }
    g.rows.push_back({lineno, *cond, mix});
  }

  for (const auto& key : order) {
    const Group& g = groups.at(key);
    if (g.rows.empty()) continue;
    ConditionTriplet t;
    try {
      t.target = read_wav(g.source1, g.rate);
      t.enrollment = read_wav(g.enrollment, g.rate);
      std::size_t n = t.target.size();
      std::vector<Row> kept;
      for (const Row& r : g.rows) {
        try {
          t.mixture(r.condition) = read_wav(r.mixture, g.rate);
          n = std::min(n, t.mixture(r.condition).size());
          kept.push_back(r);
        } catch (const Error& e) {
          result.rejected.push_back({r.line, e.what()});
        }
      }
      if (kept.empty()) continue;
      // Min mode: everything shares the shortest length.
      t.target = t.target.truncated(n);
      for (Condition c : kAllConditions) {
        if (t.has(c)) t.mixture(c) = t.mixture(c).truncated(n);
      }
      std::tie(t.speaker_id, t.interferer_id) =
          speakers_from_stem(g.rows.front().mixture);
      t.target_utt = -1;
      t.snr_db = t.sir_db = std::numeric_limits<double>::quiet_NaN();
      // Stored mixtures are independently normalized and quantized, so the
      // shared-noise identity is not re-checked here.
      t.validate(std::numeric_limits<double>::infinity());
      result.pool.push_back(std::move(t));
    } catch (const Error& e) {
      for (const Row& r : g.rows) result.rejected.push_back({r.line, e.what()});
    }
  }
  std::sort(result.rejected.begin(), result.rejected.end(),
            [](const auto& a, const auto& b) { return a.line < b.line; });
  for (const auto& r : result.rejected) {
    spdlog::warn("manifest {} line {}: {}", path.string(), r.line, r.reason);
  }
  return result;
}

}  // namespace lgtse::data
