// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <fstream>

#include "lgtse/common/error.hpp"
#include "lgtse/eval/eval.hpp"
#include "support/fixtures.hpp"
#include "support/test_support.hpp"

namespace lgtse::eval {
namespace {

using metrics::MetricRow;

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

// 1 s clips: half-second pseudo-speech often has too few active frames for
// one STOI segment.
const std::vector<data::ConditionTriplet>& pool() {
  static const auto p = [] {
    auto c = test::small_corpus_config(21);
    c.duration_s = 1.0;
    c.utts_per_speaker = 4;
    data::PoolConfig pc;
    pc.seed = 121;
    pc.enroll_s = 1.0;
    return data::build_pool(data::synth_corpus(c), pc, data::Split::kAll);
  }();
  return p;
}

// Swaps what the two noisy conditions return.
class SwappedIdentity : public Extractor {
 public:
  Waveform extract(const data::ConditionTriplet& t, Condition c) const override {
    if (c == Condition::kSingleNoise) return t.y_both;
    if (c == Condition::kTwoSpeakerNoise) return t.y_single;
    return t.mixture(c);
  }
  std::string id() const override { return "swapped"; }
};

TEST(Evaluate, OracleStubHitsTheClamp) {
  const auto r = evaluate(OracleExtractor{}, pool());
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.si_sdr, 60.0);
    EXPECT_GE(row.stoi, 99.0);
    EXPECT_EQ(row.n_items, static_cast<int>(pool().size()));
    EXPECT_FALSE(row.pesq.has_value());
  }
  EXPECT_EQ(r.model_id, "oracle-stub");
}

TEST(Evaluate, IdentityStubEqualsUnprocessed) {
  const auto r = evaluate(IdentityExtractor{}, pool());
  ASSERT_EQ(r.rows.size(), r.unprocessed.size());
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    EXPECT_EQ(r.rows[k].condition, r.unprocessed[k].condition);
    EXPECT_NEAR(r.rows[k].si_sdr, r.unprocessed[k].si_sdr, 1e-9);
    EXPECT_NEAR(r.rows[k].stoi, r.unprocessed[k].stoi, 1e-9);
  }
}

TEST(Evaluate, UnprocessedOrdering) {
  const auto r = evaluate(IdentityExtractor{}, pool());
  const double a = r.unprocessed_row(Condition::kSingleNoise)->si_sdr;
  const double b = r.unprocessed_row(Condition::kTwoSpeaker)->si_sdr;
  const double c = r.unprocessed_row(Condition::kTwoSpeakerNoise)->si_sdr;
  EXPECT_GT(a, b);
  EXPECT_GT(b, c);
}

TEST(Evaluate, ConditionSubsetAndAggregate) {
  EvalOptions o;
  o.conditions = {Condition::kTwoSpeaker};
  o.with_stoi = false;
  const auto r = evaluate(IdentityExtractor{}, pool(), o);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].condition, Condition::kTwoSpeaker);
  EXPECT_EQ(r.row(Condition::kSingleNoise), nullptr);

  const auto full = evaluate(IdentityExtractor{}, pool());
  const auto agg = full.aggregate();
  double s = 0.0;
  for (const auto& row : full.rows) s += row.si_sdr;
  EXPECT_DOUBLE_EQ(agg.si_sdr, s / 3.0);
}

TEST(Evaluate, MissingConditionIsSkipped) {
  auto p = pool();
  for (auto& t : p) t.y_clean2 = Waveform({}, 8000);
  const auto r = evaluate(IdentityExtractor{}, p);
  EXPECT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.row(Condition::kTwoSpeaker), nullptr);
}

TEST(Evaluate, PesqHookFillsColumn) {
  test::TempDir dir;
  EvalOptions o;
  o.with_stoi = false;
  o.pesq = metrics::PesqHook("test -s {estimate} && test -s {reference} && echo 2.5");
  o.scratch_dir = dir.path();
  const auto r = evaluate(IdentityExtractor{}, pool(), o);
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.pesq.has_value());
    EXPECT_DOUBLE_EQ(*row.pesq, 2.5);
  }
  EXPECT_TRUE(r.aggregate().pesq.has_value());
}

TEST(Evaluate, DeterministicAndSideEffectFree) {
  const model::LgtseModel m{test::small_model_config()};
  const auto before = m.parameters().all()[0].value;
  const ModelExtractor ex(m, "small");
  const auto a = evaluate(ex, pool()), b = evaluate(ex, pool());
  EXPECT_EQ(render_report(a, Format::kCsv), render_report(b, Format::kCsv));
  EXPECT_EQ(m.parameters().all()[0].value, before);
}

TEST(ConsistencyGap, StubsAndSymmetry) {
  EXPECT_EQ(consistency_gap(OracleExtractor{}, pool()), 0.0);
  double want = 0.0;
  for (const auto& t : pool()) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.target.size(); ++i) {
      s += std::abs(t.y_single.samples[i] - t.y_both.samples[i]);
    }
    want += s / static_cast<double>(t.target.size());
  }
  want /= static_cast<double>(pool().size());
  EXPECT_NEAR(consistency_gap(IdentityExtractor{}, pool()), want, 1e-12);
  // y_single - y_both = -(interferer contribution).
  double interf = 0.0;
  for (const auto& t : pool()) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.target.size(); ++i) {
      s += std::abs(t.y_clean2.samples[i] - t.target.samples[i]);
    }
    interf += s / static_cast<double>(t.target.size());
  }
  EXPECT_NEAR(want, interf / static_cast<double>(pool().size()), 1e-9);
  EXPECT_EQ(consistency_gap(SwappedIdentity{}, pool()), consistency_gap(IdentityExtractor{}, pool()));

  auto partial = pool();
  for (auto& t : partial) t.y_both = Waveform({}, 8000);
  EXPECT_TRUE(std::isnan(consistency_gap(IdentityExtractor{}, partial)));
}

TEST(Probe, UntrainedDenoiserIsIdentityAndRenders) {
  test::TempDir dir;
  const model::LgtseModel m{test::small_model_config(model::InitMode::kIdentity)};
  const auto r = denoiser_probe(m, pool(), dir / "probe.png");
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_LE(row.relative_change, 1e-9);
    // Samples past the last full frame are not resynthesized, so the
    // waveform-level numbers differ slightly even for an identity front-end.
    EXPECT_LE(row.si_sdr_out, row.si_sdr_in + 1e-9);
    if (row.condition != Condition::kTwoSpeaker) {
      EXPECT_NEAR(row.si_sdr_in, row.si_sdr_out, 0.1);
    }
    EXPECT_EQ(row.n_items, static_cast<int>(pool().size()));
  }
  EXPECT_EQ(r.find(Condition::kTwoSpeaker)->condition, Condition::kTwoSpeaker);
  ASSERT_EQ(r.image, dir / "probe.png");

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_file(&img, r.image.c_str()));
  EXPECT_GT(img.width, img.height);  // three columns, two rows
  png_image_free(&img);
}

TEST(Png, WritesGrayImage) {
  test::TempDir dir;
  write_png_gray(dir / "g.png", 4, 2, {0, 0.25, 0.5, 1, 1, 0.5, 0.25, 0});
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_file(&img, (dir / "g.png").c_str()));
  img.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  ASSERT_TRUE(png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr));
  EXPECT_EQ(img.width, 4u);
  EXPECT_EQ(buf[0], 0);
  EXPECT_EQ(buf[3], 255);
  EXPECT_EQ(buf[4], 255);
  expect_kind(ErrorKind::kShape, [&] { write_png_gray(dir / "bad.png", 3, 3, {0.0}); });
}

EvalReport sample_report() {
  EvalReport r;
  r.model_id = "run-a";
  r.corpus_id = "synthetic seed=1";
  r.rows = {{Condition::kSingleNoise, 9.123456789, 81.5, 2.75, 10},
            {Condition::kTwoSpeaker, 1.0 / 3.0, 70.25, std::nullopt, 10}};
  r.unprocessed = {{Condition::kSingleNoise, 5.5, 75.0, std::nullopt, 10},
                   {Condition::kTwoSpeaker, -0.25, 60.0, std::nullopt, 10}};
  r.metadata = {{"seed", "1"}, {"config_hash", "abc"}};
  r.consistency_gap = 0.0123;
  return r;
}

TEST(Render, MarkdownLayout) {
  const auto md = render_report(sample_report(), Format::kMarkdown);
  EXPECT_NE(md.find("| System |"), std::string::npos);
  EXPECT_NE(md.find("1spk+noise SI-SDR"), std::string::npos);
  EXPECT_NE(md.find("| Unprocessed |"), std::string::npos);
  EXPECT_NE(md.find("| run-a |"), std::string::npos);
  EXPECT_NE(md.find("—"), std::string::npos);  // missing PESQ
  EXPECT_EQ(md, render_report(sample_report(), Format::kMarkdown));

  EvalReport one = sample_report();
  one.rows.resize(1);
  one.unprocessed.clear();
  const auto single = render_report(one, Format::kMarkdown);
  int table_rows = 0;
  std::istringstream in(single);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("| ", 0) == 0 && line.find("System") == std::string::npos) ++table_rows;
  }
  EXPECT_EQ(table_rows, 1);
  EXPECT_FALSE(render_report(one, Format::kText).empty());
}

TEST(Render, CsvRoundTrip) {
  const auto r = sample_report();
  const auto back = parse_report_csv(render_report(r, Format::kCsv));
  EXPECT_EQ(back.model_id, r.model_id);
  EXPECT_EQ(back.corpus_id, r.corpus_id);
  EXPECT_EQ(back.metadata, r.metadata);
  ASSERT_TRUE(back.consistency_gap.has_value());
  EXPECT_EQ(*back.consistency_gap, *r.consistency_gap);
  for (auto [got, want] : {std::pair{&back.rows, &r.rows}, std::pair{&back.unprocessed, &r.unprocessed}}) {
    ASSERT_EQ(got->size(), want->size());
    for (std::size_t k = 0; k < want->size(); ++k) {
      EXPECT_EQ((*got)[k].condition, (*want)[k].condition);
      EXPECT_EQ((*got)[k].si_sdr, (*want)[k].si_sdr);
      EXPECT_EQ((*got)[k].stoi, (*want)[k].stoi);
      EXPECT_EQ((*got)[k].pesq, (*want)[k].pesq);
      EXPECT_EQ((*got)[k].n_items, (*want)[k].n_items);
    }
  }
  expect_kind(ErrorKind::kValidation, [] { parse_report_csv("nonsense\n1,2\n"); });
}

TEST(Render, FormatNames) {
  EXPECT_EQ(parse_format("markdown"), Format::kMarkdown);
  EXPECT_EQ(parse_format("md"), Format::kMarkdown);
  EXPECT_EQ(parse_format("csv"), Format::kCsv);
  EXPECT_EQ(parse_format("text"), Format::kText);
  expect_kind(ErrorKind::kUsage, [] { parse_format("latex"); });
}

TEST(Compare, ZeroAntisymmetricAndDisjoint) {
  const auto a = sample_report();
  auto b = a;
  for (auto& row : b.rows) {
    row.si_sdr -= 1.5;
    row.stoi += 2.0;
  }
  for (const auto& row : compare(a, a)) {
    EXPECT_EQ(row.d_si_sdr, 0.0);
    EXPECT_EQ(row.d_stoi, 0.0);
  }
  const auto ab = compare(a, b), ba = compare(b, a);
  ASSERT_EQ(ab.size(), 2u);
  for (std::size_t k = 0; k < ab.size(); ++k) {
    EXPECT_DOUBLE_EQ(ab[k].d_si_sdr, 1.5);
    EXPECT_EQ(ab[k].d_si_sdr, -ba[k].d_si_sdr);
    EXPECT_EQ(ab[k].d_stoi, -ba[k].d_stoi);
  }
  EXPECT_TRUE(ab[0].d_pesq.has_value());
  EXPECT_FALSE(ab[1].d_pesq.has_value());
  const auto text = render_compare(ab, "a", "b");
  EXPECT_NE(text.find("+1.50"), std::string::npos);

  auto c = a;
  c.rows = {{Condition::kTwoSpeakerNoise, 1.0, 50.0, std::nullopt, 1}};
  expect_kind(ErrorKind::kValidation, [&] { compare(a, c); });
}

}  // namespace
}  // namespace lgtse::eval
