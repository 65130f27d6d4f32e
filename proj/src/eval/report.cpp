// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lgtse/common/error.hpp"
#include "lgtse/eval/eval.hpp"

namespace lgtse::eval {

using metrics::MetricRow;

namespace {

constexpr const char* kMissing = "—";

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

std::string opt(const std::optional<double>& v, const char* f) {
  return v ? fmt(f, *v) : kMissing;
}

std::vector<Condition> report_conditions(const EvalReport& r) {
  std::vector<Condition> out;
  for (Condition c : kAllConditions) {
    if (r.row(c) || r.unprocessed_row(c)) out.push_back(c);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out(1);
  for (char ch : s) {
    if (ch == sep) {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  raise(ErrorKind::kValidation, "report CSV: not a number: '" + s + "'");
}

std::optional<double> to_optional(const std::string& s) {
  if (s.empty() || s == kMissing) return std::nullopt;
  return to_double(s);
}

// Cells for one system row in the wide layout.
std::vector<std::string> wide_cells(const std::vector<Condition>& conds,
                                    const std::vector<MetricRow>& rows) {
  std::vector<std::string> cells;
  for (Condition c : conds) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const MetricRow& r) { return r.condition == c; });
    if (it == rows.end()) {
      cells.insert(cells.end(), {kMissing, kMissing, kMissing});
    } else {
      cells.push_back(fmt("%.2f", it->si_sdr));
      cells.push_back(opt(it->pesq, "%.2f"));
      cells.push_back(fmt("%.2f", it->stoi));
    }
  }
  const MetricRow m = EvalReport::mean(rows);
  cells.push_back(fmt("%.2f", m.si_sdr));
  cells.push_back(opt(m.pesq, "%.2f"));
  cells.push_back(fmt("%.2f", m.stoi));
  return cells;
}

std::string render_markdown(const EvalReport& r) {
  const auto conds = report_conditions(r);
  std::ostringstream o;
  o << "| System |";
  for (Condition c : conds) {
    o << ' ' << label(c) << " SI-SDR | " << label(c) << " PESQ | " << label(c)
      << " STOI |";
  }
  o << " Mean SI-SDR | Mean PESQ | Mean STOI |\n|---|";
  for (std::size_t i = 0; i < 3 * conds.size() + 3; ++i) o << "---:|";
  o << '\n';
  auto line = [&](const std::string& name, const std::vector<MetricRow>& rows) {
    o << "| " << name << " |";
    for (const auto& cell : wide_cells(conds, rows)) o << ' ' << cell << " |";
    o << '\n';
  };
  if (!r.unprocessed.empty()) line("Unprocessed", r.unprocessed);
  line(r.model_id.empty() ? "model" : r.model_id, r.rows);
  o << "\nSI-SDR in dB, STOI in %. Mean columns are the unweighted mean over the "
       "listed conditions.\n";
  o << "\nItems per condition:";
  for (const auto& row : r.rows) o << ' ' << label(row.condition) << '=' << row.n_items;
  o << '\n';
  if (r.consistency_gap) {
    o << "\nConsistency gap (mean |s1 - s2|, 1spk+noise vs 2spk+noise): "
      << fmt("%.6f", *r.consistency_gap) << '\n';
  }
  if (r.probe) {
    o << "\n| Denoiser probe | rel. change | SI-SDR in | SI-SDR out | delta |\n"
         "|---|---:|---:|---:|---:|\n";
    for (const auto& p : r.probe->rows) {
      o << "| " << label(p.condition) << " | " << fmt("%.4f", p.relative_change)
        << " | " << fmt("%.2f", p.si_sdr_in) << " | " << fmt("%.2f", p.si_sdr_out)
        << " | " << fmt("%+.2f", p.si_sdr_out - p.si_sdr_in) << " |\n";
    }
    if (!r.probe->image.empty()) {
      o << "\nSpectrograms: " << r.probe->image.filename().string() << '\n';
    }
  }
  if (!r.metadata.empty()) {
    o << '\n';
    for (const auto& [k, v] : r.metadata) o << "- " << k << ": " << v << '\n';
  }
  return o.str();
}

std::string render_csv(const EvalReport& r) {
  std::ostringstream o;
  o << "# model_id=" << r.model_id << '\n';
  o << "# corpus_id=" << r.corpus_id << '\n';
  for (const auto& [k, v] : r.metadata) o << "# meta." << k << '=' << v << '\n';
  if (r.consistency_gap) o << "# consistency_gap=" << exact(*r.consistency_gap) << '\n';
  if (r.probe) {
    for (const auto& p : r.probe->rows) {
      o << "# probe." << label(p.condition) << '=' << exact(p.relative_change) << ';'
        << exact(p.si_sdr_in) << ';' << exact(p.si_sdr_out) << ';' << p.n_items << '\n';
    }
  }
  o << "system,condition,si_sdr,pesq,stoi,n_items\n";
  auto rows = [&](const char* sys, const std::vector<MetricRow>& rs) {
    for (const auto& m : rs) {
      o << sys << ',' << label(m.condition) << ',' << exact(m.si_sdr) << ','
        << (m.pesq ? exact(*m.pesq) : kMissing) << ',' << exact(m.stoi) << ','
        << m.n_items << '\n';
    }
  };
  rows("unprocessed", r.unprocessed);
  rows("model", r.rows);
  const MetricRow m = r.aggregate();
  o << "mean,all," << exact(m.si_sdr) << ',' << (m.pesq ? exact(*m.pesq) : kMissing)
    << ',' << exact(m.stoi) << ',' << m.n_items << '\n';
  return o.str();
}

std::string render_text(const EvalReport& r) {
  std::ostringstream o;
  o << "model: " << r.model_id << "\ncorpus: " << r.corpus_id << '\n';
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-12s %9s %7s %8s %6s\n", "system", "condition",
                "SI-SDR", "PESQ", "STOI", "items");
  o << buf;
  auto rows = [&](const char* sys, const std::vector<MetricRow>& rs) {
    for (const auto& m : rs) {
      std::snprintf(buf, sizeof(buf), "%-12s %-12s %9.2f %7s %8.2f %6d\n", sys,
                    std::string(label(m.condition)).c_str(), m.si_sdr,
                    m.pesq ? fmt("%.2f", *m.pesq).c_str() : "-", m.stoi, m.n_items);
      o << buf;
    }
  };
  rows("unprocessed", r.unprocessed);
  rows("model", r.rows);
  const MetricRow m = r.aggregate();
  std::snprintf(buf, sizeof(buf), "%-12s %-12s %9.2f %7s %8.2f %6d\n", "mean", "all",
                m.si_sdr, m.pesq ? fmt("%.2f", *m.pesq).c_str() : "-", m.stoi,
                m.n_items);
  o << buf;
  if (r.consistency_gap) o << "consistency gap: " << fmt("%.6f", *r.consistency_gap) << '\n';
  return o.str();
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "markdown" || name == "md") return Format::kMarkdown;
  if (name == "csv") return Format::kCsv;
  if (name == "text" || name == "txt") return Format::kText;
  raise(ErrorKind::kUsage,
        "unknown report format '" + name + "' (expected markdown, csv or text)");
}

std::string render_report(const EvalReport& r, Format f) {
  switch (f) {
    case Format::kMarkdown:
      return render_markdown(r);
    case Format::kCsv:
      return render_csv(r);
    case Format::kText:
      return render_text(r);
  }
  raise(ErrorKind::kUsage, "unknown report format");
}

EvalReport parse_report_csv(const std::string& csv) {
  EvalReport r;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const std::string kv = line.substr(2);
      const auto eq = kv.find('=');
      require(eq != std::string::npos, ErrorKind::kValidation,
              "report CSV: malformed comment line");
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "model_id") {
        r.model_id = v;
      } else if (k == "corpus_id") {
        r.corpus_id = v;
      } else if (k.rfind("meta.", 0) == 0) {
        r.metadata[k.substr(5)] = v;
      } else if (k == "consistency_gap") {
        r.consistency_gap = to_double(v);
      } else if (k.rfind("probe.", 0) == 0) {
        const auto c = parse_condition(k.substr(6));
        const auto f = split(v, ';');
        require(c.has_value() && f.size() == 4, ErrorKind::kValidation,
                "report CSV: malformed probe line");
        if (!r.probe) r.probe = ProbeReport{};
        r.probe->rows.push_back({*c, to_double(f[0]), to_double(f[1]), to_double(f[2]),
                                 static_cast<int>(to_double(f[3]))});
      }
      continue;
    }
    if (!header) {
      require(line == "system,condition,si_sdr,pesq,stoi,n_items", ErrorKind::kValidation,
              "report CSV: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    require(f.size() == 6, ErrorKind::kValidation, "report CSV: expected 6 fields");
    if (f[0] == "mean") continue;  // derived
    const auto c = parse_condition(f[1]);
    require(c.has_value(), ErrorKind::kValidation, "report CSV: unknown condition");
    MetricRow m;
    m.condition = *c;
    m.si_sdr = to_double(f[2]);
    m.pesq = to_optional(f[3]);
    m.stoi = to_double(f[4]);
    m.n_items = static_cast<int>(to_double(f[5]));
    if (f[0] == "unprocessed") {
      r.unprocessed.push_back(m);
    } else if (f[0] == "model") {
      r.rows.push_back(m);
    } else {
      raise(ErrorKind::kValidation, "report CSV: unknown system '" + f[0] + "'");
    }
  }
  require(header, ErrorKind::kValidation, "report CSV: no header");
  return r;
}

std::vector<CompareRow> compare(const EvalReport& a, const EvalReport& b) {
  std::vector<CompareRow> out;
  for (const auto& ra : a.rows) {
    const MetricRow* rb = b.row(ra.condition);
    if (!rb) continue;
    CompareRow c;
    c.condition = ra.condition;
    c.d_si_sdr = ra.si_sdr - rb->si_sdr;
    c.d_stoi = ra.stoi - rb->stoi;
    if (ra.pesq && rb->pesq) c.d_pesq = *ra.pesq - *rb->pesq;
    out.push_back(c);
  }
  require(!out.empty(), ErrorKind::kValidation,
          "reports share no evaluated condition");
  return out;
}

std::string render_compare(const std::vector<CompareRow>& rows, const std::string& a_id,
                           const std::string& b_id) {
  std::ostringstream o;
  o << "Deltas: " << a_id << " minus " << b_id << " (positive = first is better)\n\n";
  o << "| Condition | dSI-SDR (dB) | dPESQ | dSTOI (%) |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows) {
    o << "| " << label(r.condition) << " | " << fmt("%+.2f", r.d_si_sdr) << " | "
      << (r.d_pesq ? fmt("%+.2f", *r.d_pesq) : kMissing) << " | "
      << fmt("%+.2f", r.d_stoi) << " |\n";
  }
  return o.str();
}

void write_png_gray(const std::filesystem::path& path, int width, int height,
                    const std::vector<double>& pixels) {
  require(width > 0 && height > 0 &&
              pixels.size() == static_cast<std::size_t>(width) * height,
          ErrorKind::kShape, "image size does not match pixel count");
  std::vector<png_byte> buf(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(255.0 * std::clamp(pixels[i], 0.0, 1.0)));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = PNG_FORMAT_GRAY;
  const int ok = png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr);
  require(ok != 0, ErrorKind::kIo,
          "cannot write PNG " + path.string() + ": " + img.message);
}

}  // namespace lgtse::eval
