// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "lgtse/cli/cli.hpp"
#include "lgtse/eval/eval.hpp"
#include "lgtse/model/serialize.hpp"

namespace lgtse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    raise(ErrorKind::kIo, path.string() + ": " + e.what());
  }
}

bool dir_nonempty(const fs::path& p) {
  return fs::is_directory(p) && !fs::is_empty(p);
}

// Flags shared by the commands that resolve a RunConfig.
struct ConfigFlags {
  std::string config_file;
  Overrides flags;
  std::uint64_t seed = 0;
  std::string mode, condition, stages;
  double w = 0.0, lr = 0.0;
  int epochs = 0, pretrain_epochs = 0;
  std::size_t batch_size = 0;
  std::int64_t max_steps = 0;
  bool tiny = false;
  std::map<std::string, CLI::Option*> opts;

  void add_common(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_file, "JSON run config");
    opts["seed"] = app->add_option("--seed", seed, "global seed");
    opts["tiny"] = app->add_flag("--tiny", tiny,
                                 "CI preset: 4 speakers, 1 s clips, <10K-param backbone");
  }
  void add_training(CLI::App* app) {
    opts["mode"] = app->add_option(
        "--mode", mode, "condition-wise | triplec | triplec-parallel | shuffled");
    opts["condition"] =
        app->add_option("--condition", condition, "condition for condition-wise mode");
    opts["w"] = app->add_option("--w", w, "consistency weight");
    opts["epochs"] = app->add_option("--epochs", epochs, "finetuning epochs");
    opts["pretrain_epochs"] =
        app->add_option("--pretrain-epochs", pretrain_epochs, "epochs per pretraining stage");
    opts["stages"] = app->add_option(
        "--stages", stages,
        "comma list of pretrain_denoiser, pretrain_backbone, finetune_joint");
    opts["batch_size"] = app->add_option("--batch-size", batch_size, "target groups per step");
    opts["lr"] = app->add_option("--lr", lr, "initial learning rate");
    opts["max_steps"] =
        app->add_option("--max-steps", max_steps, "cap on optimizer steps per stage");
  }
  bool given(const std::string& k) const {
    auto it = opts.find(k);
    return it != opts.end() && it->second->count() > 0;
  }
  Overrides collect() const {
    Overrides o;
    if (given("seed")) o.seed = seed;
    if (given("tiny")) o.tiny = tiny;
    if (given("mode")) o.mode = mode;
    if (given("condition")) o.condition = condition;
    if (given("w")) o.w = w;
    if (given("epochs")) o.epochs = epochs;
    if (given("pretrain_epochs")) o.pretrain_epochs = pretrain_epochs;
    if (given("batch_size")) o.batch_size = batch_size;
    if (given("lr")) o.lr = lr;
    if (given("max_steps")) o.max_steps = max_steps;
    if (given("stages")) {
      std::vector<std::string> v;
      std::stringstream ss(stages);
      for (std::string s; std::getline(ss, s, ',');) {
        if (!s.empty()) v.push_back(s);
      }
      o.stages = v;
    }
    return o;
  }
  std::optional<fs::path> file() const {
    if (config_file.empty()) return std::nullopt;
    return fs::path(config_file);
  }
};

std::vector<Condition> parse_conditions(const std::string& list) {
  std::vector<Condition> out;
  std::stringstream ss(list);
  for (std::string s; std::getline(ss, s, ',');) {
    if (s.empty()) continue;
    const auto c = parse_condition(s);
    require(c.has_value(), ErrorKind::kUsage,
            "unknown condition '" + s + "'; valid: 1spk+noise, 2spk, 2spk+noise");
    if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
  }
  require(!out.empty(), ErrorKind::kUsage, "--conditions is empty");
  return out;
}

// ---- simulate ----

struct SimulateArgs {
  ConfigFlags cfg;
  std::string out;
  int speakers = 0, utts = 0, rate = 0, noise_clips = 0;
  double duration = 0.0;
  bool force = false;
  CLI::Option *o_speakers, *o_utts, *o_rate, *o_noise, *o_duration;
};

int cmd_simulate(SimulateArgs& a) {
  RunConfig rc =
      resolve_config(a.cfg.file(), Overrides::from_environment(), a.cfg.collect());
  if (a.o_speakers->count()) rc.corpus.n_speakers = a.speakers;
  if (a.o_utts->count()) rc.corpus.utts_per_speaker = a.utts;
  if (a.o_rate->count()) rc.corpus.sample_rate = a.rate;
  if (a.o_noise->count()) rc.corpus.noise_clips = a.noise_clips;
  if (a.o_duration->count()) rc.corpus.duration_s = a.duration;
  rc.corpus.validate();
  rc.pool.validate();

  const fs::path out = a.out;
  if (dir_nonempty(out)) {
    require(a.force, ErrorKind::kIo,
            out.string() + " already exists; pass --force to overwrite it");
    require(fs::exists(out / "index.json"), ErrorKind::kIo,
            out.string() + " is not a corpus directory; refusing to overwrite it");
    for (const auto& entry : fs::directory_iterator(out)) {
      if (entry.path().filename() != DirLock::kFileName) fs::remove_all(entry.path());
    }
  }
  DirLock lock(out);
  json dump = rc.to_json();
  dump["command"] = "simulate";
  write_file(out / "run_config.json", dump.dump(2) + "\n");

  spdlog::info("synthesizing {} speakers x {} utterances ({} s at {} Hz)",
               rc.corpus.n_speakers, rc.corpus.utts_per_speaker, rc.corpus.duration_s,
               rc.corpus.sample_rate);
  const data::Corpus corpus = data::synth_corpus(rc.corpus);
  data::save_corpus(corpus, out);

  // Unprocessed metrics per condition over every triplet of the corpus.
  const auto pool = data::build_pool(corpus, rc.pool, data::Split::kAll);
  eval::EvalReport r = eval::evaluate(eval::IdentityExtractor{}, pool);
  r.model_id = "unprocessed";
  r.corpus_id = "synthetic-" + config_hash(dump.at("corpus")) + "-seed" +
                std::to_string(rc.seed);
  const double s1 = r.unprocessed_row(Condition::kSingleNoise)->si_sdr;
  const double s2 = r.unprocessed_row(Condition::kTwoSpeaker)->si_sdr;
  const double s3 = r.unprocessed_row(Condition::kTwoSpeakerNoise)->si_sdr;
  const bool ordered = s1 > s2 && s2 > s3;
  json rep = {{"corpus_id", r.corpus_id}, {"triplets", pool.size()},
              {"ordering_holds", ordered}, {"conditions", json::array()}};
  for (const auto& row : r.unprocessed) {
    rep["conditions"].push_back({{"condition", label(row.condition)},
                                 {"si_sdr_db", row.si_sdr},
                                 {"stoi_percent", row.stoi},
                                 {"n_items", row.n_items}});
  }
  write_file(out / "generation_report.json", rep.dump(2) + "\n");
  r.unprocessed.clear();  // the identity rows already are the unprocessed ones
  r.model_id = "Unprocessed";
  std::string md = "# Generation report\n\nUnprocessed mixtures, " +
                   std::to_string(pool.size()) + " triplets.\n\n";
  md += eval::render_report(r, eval::Format::kMarkdown);
  md += std::string("\nOrdering 1spk+noise > 2spk > 2spk+noise: ") +
        (ordered ? "holds" : "VIOLATED") + "\n";
  write_file(out / "generation_report.md", md);
  if (!ordered) spdlog::warn("unprocessed SI-SDR ordering does not hold on this corpus");
  std::printf("corpus written to %s (%zu speech clips, %zu noise clips)\n",
              out.string().c_str(), corpus.speech.size(), corpus.noise.size());
  std::printf("unprocessed SI-SDR: 1spk+noise %.2f dB, 2spk %.2f dB, 2spk+noise %.2f dB\n",
              s1, s2, s3);
  return kOk;
}

// ---- train ----

struct TrainArgs {
  ConfigFlags cfg;
  std::string corpus, run_dir;
  bool resume = false, force = false;
  int stop_after = 0;
};

int cmd_train(TrainArgs& a) {
  const fs::path run_dir = a.run_dir;
  const fs::path saved = run_dir / "run_config.json";
  std::optional<fs::path> file = a.cfg.file();
  if (a.resume && !file && fs::exists(saved)) file = saved;
  const RunConfig rc =
      resolve_config(file, Overrides::from_environment(), a.cfg.collect());
  rc.train.validate();

  fs::path corpus_dir = a.corpus;
  if (corpus_dir.empty() && file) {
    corpus_dir = read_json_file(*file).value("corpus_dir", std::string());
  }
  require(!corpus_dir.empty(), ErrorKind::kUsage, "train needs --corpus");
  require(fs::exists(corpus_dir / "index.json"), ErrorKind::kIo,
          "corpus not found: " + (corpus_dir / "index.json").string());

  const bool has_checkpoints = !training::latest_checkpoint(run_dir).empty();
  if (has_checkpoints && !a.resume) {
    require(a.force, ErrorKind::kIo,
            run_dir.string() +
                " already holds a training run; pass --resume to continue it or "
                "--force to start over");
  }
  DirLock lock(run_dir);
  if (has_checkpoints && !a.resume) {
    fs::remove_all(run_dir / "checkpoints");
    fs::remove(run_dir / "train_log.jsonl");
  }

  json dump = rc.to_json();
  dump["command"] = "train";
  dump["corpus_dir"] = fs::absolute(corpus_dir).lexically_normal().string();
  if (a.resume && fs::exists(saved)) {
    json old = read_json_file(saved);
    require(old.at("train") == dump.at("train") && old.at("pool") == dump.at("pool"),
            ErrorKind::kConfig,
            "resume config differs from " + saved.string() +
                "; drop the conflicting flags or start a new run directory");
  } else {
    write_file(saved, dump.dump(2) + "\n");
  }

  const data::Corpus corpus = data::load_corpus(corpus_dir);
  const auto pool = data::build_pool(corpus, rc.pool, data::Split::kTrain);
  const model::LgtseModel probe(rc.train.model);
  spdlog::info("training on {} triplets; {} parameters ({} denoiser, {} backbone)",
               pool.size(), probe.parameter_count(),
               probe.parameter_count(ad::ParamGroup::kDenoiser),
               probe.parameter_count(ad::ParamGroup::kBackbone));

  training::RunOptions opts;
  opts.resume = a.resume && has_checkpoints;
  if (a.resume && !has_checkpoints) spdlog::warn("--resume: no checkpoint yet, starting fresh");
  opts.stop_after_epochs = a.stop_after;
  const training::TrainResult res = training::run_training(rc.train, pool, run_dir, opts);
  std::printf("checkpoint: %s\nlog: %s\n", res.final_checkpoint.string().c_str(),
              res.log_path.string().c_str());
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  ConfigFlags cfg;
  std::string corpus, manifest, checkpoint, run_dir, stub, split = "heldout",
                                                           conditions, out, format =
                                                                            "markdown";
  bool no_stoi = false, no_probe = false;
};

int cmd_eval(EvalArgs& a) {
  eval::parse_format(a.format);  // fail early on a bad name
  const int sources = !a.checkpoint.empty() + !a.run_dir.empty() + !a.stub.empty();
  require(sources == 1, ErrorKind::kUsage,
          "eval needs exactly one of --checkpoint, --run-dir, --stub");
  require(a.corpus.empty() != a.manifest.empty(), ErrorKind::kUsage,
          "eval needs exactly one of --corpus, --manifest");
  if (!a.stub.empty()) {
    require(a.stub == "identity" || a.stub == "oracle", ErrorKind::kUsage,
            "--stub must be identity or oracle");
  }
  data::Split split = data::Split::kHeldOut;
  if (a.split == "train") {
    split = data::Split::kTrain;
  } else if (a.split == "all") {
    split = data::Split::kAll;
  } else {
    require(a.split == "heldout", ErrorKind::kUsage,
            "--split must be train, heldout or all");
  }

  // A run directory's own config fixes the pool it was trained on.
  std::optional<fs::path> file = a.cfg.file();
  fs::path checkpoint = a.checkpoint;
  if (!a.run_dir.empty()) {
    checkpoint = training::latest_checkpoint(a.run_dir);
    require(!checkpoint.empty(), ErrorKind::kIo,
            "no checkpoint found under " + (fs::path(a.run_dir) / "checkpoints").string());
    if (!file && fs::exists(fs::path(a.run_dir) / "run_config.json")) {
      file = fs::path(a.run_dir) / "run_config.json";
    }
  }
  if (!checkpoint.empty()) {
    require(fs::exists(checkpoint / "manifest.json"), ErrorKind::kIo,
            "checkpoint not found: " + (checkpoint / "manifest.json").string());
  }
  const RunConfig rc =
      resolve_config(file, Overrides::from_environment(), a.cfg.collect());
  const std::vector<Condition> conds =
      a.conditions.empty() ? std::vector<Condition>(kAllConditions.begin(),
                                                    kAllConditions.end())
                           : parse_conditions(a.conditions);

  // Identify everything that determines the report.
  json id = {{"command", "eval"}, {"split", a.split}, {"stoi", !a.no_stoi},
             {"probe", !a.no_probe}, {"pool", rc.to_json().at("pool")},
             {"seed", rc.seed}};
  for (Condition c : conds) id["conditions"].push_back(label(c));
  std::optional<model::LgtseModel> model;
  std::string model_id;
  if (!a.stub.empty()) {
    id["model"] = {{"stub", a.stub}};
    model_id = a.stub + "-stub";
  } else {
    const json man = read_json_file(checkpoint / "manifest.json");
    model.emplace(training::load_checkpoint(checkpoint));
    id["model"] = {{"checkpoint", fs::absolute(checkpoint).lexically_normal().string()},
                   {"step", man.value("step", std::int64_t{-1})}};
    model_id = checkpoint.parent_path().parent_path().filename().string() + "/" +
               checkpoint.filename().string();
  }

  std::vector<data::ConditionTriplet> pool;
  std::string corpus_id;
  if (!a.corpus.empty()) {
    const data::Corpus corpus = data::load_corpus(a.corpus);
    pool = data::build_pool(corpus, rc.pool, split);
    const json cj = read_json_file(fs::path(a.corpus) / "index.json").at("config");
    corpus_id = "synthetic-" + config_hash(cj) + "-" + a.split;
    id["data"] = {{"corpus", fs::absolute(a.corpus).lexically_normal().string()},
                  {"corpus_config", cj}};
  } else {
    data::ManifestLoad ml = data::load_libri2mix_manifest(a.manifest);
    require(!ml.pool.empty(), ErrorKind::kValidation,
            "manifest " + a.manifest + " yielded no usable triplets");
    if (!ml.rejected.empty()) {
      spdlog::warn("{} manifest rows rejected", ml.rejected.size());
    }
    pool = std::move(ml.pool);
    corpus_id = "libri2mix-" + fs::path(a.manifest).stem().string();
    id["data"] = {{"manifest", fs::absolute(a.manifest).lexically_normal().string()}};
  }
  require(!pool.empty(), ErrorKind::kCapacity, "evaluation pool is empty");

  const metrics::PesqHook pesq = metrics::PesqHook::from_environment();
  id["pesq"] = pesq.command_template();
  const std::string hash = config_hash(id);
  const fs::path base = !a.out.empty() ? fs::path(a.out)
                        : !a.run_dir.empty() ? fs::path(a.run_dir) / "eval"
                                             : fs::path("eval");
  const fs::path dir = base / ("eval-" + hash);
  DirLock lock(dir);
  write_file(dir / "eval_config.json", id.dump(2) + "\n");

  std::unique_ptr<eval::Extractor> ex;
  if (model) {
    ex = std::make_unique<eval::ModelExtractor>(*model, model_id);
  } else if (a.stub == "identity") {
    ex = std::make_unique<eval::IdentityExtractor>();
  } else {
    ex = std::make_unique<eval::OracleExtractor>();
  }
  eval::EvalOptions opts;
  opts.conditions = conds;
  opts.with_stoi = !a.no_stoi;
  opts.pesq = pesq;
  opts.scratch_dir = dir / "pesq_tmp";
  spdlog::info("evaluating {} on {} triplets", model_id, pool.size());
  eval::EvalReport r = eval::evaluate(*ex, pool, opts);
  std::error_code ec;
  fs::remove_all(opts.scratch_dir, ec);
  require(!r.rows.empty(), ErrorKind::kValidation,
          "no requested condition has items in the pool");
  r.corpus_id = corpus_id;
  r.metadata["config_hash"] = hash;
  r.metadata["seed"] = std::to_string(rc.seed);
  r.metadata["split"] = a.split;
  r.metadata["checkpoint"] = model ? model_id : a.stub + " stub";
  const bool has_pairs = std::any_of(pool.begin(), pool.end(), [](const auto& t) {
    return t.has(Condition::kSingleNoise) && t.has(Condition::kTwoSpeakerNoise);
  });
  if (has_pairs) r.consistency_gap = eval::consistency_gap(*ex, pool);
  if (model && !a.no_probe) {
    r.probe = eval::denoiser_probe(*model, pool, dir / "denoiser_probe.png");
  }
  write_file(dir / "report.md", eval::render_report(r, eval::Format::kMarkdown));
  write_file(dir / "report.csv", eval::render_report(r, eval::Format::kCsv));
  std::cout << eval::render_report(r, eval::parse_format(a.format));
  std::cout << "\nreport directory: " << dir.string() << "\n";
  return kOk;
}

// ---- compare ----

struct CompareArgs {
  std::string a, b, out;
};

eval::EvalReport load_report(const fs::path& p) {
  const fs::path csv = fs::is_directory(p) ? p / "report.csv" : p;
  std::ifstream in(csv);
  require(static_cast<bool>(in), ErrorKind::kIo, "report not found: " + csv.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return eval::parse_report_csv(ss.str());
}

int cmd_compare(const CompareArgs& a) {
  const eval::EvalReport ra = load_report(a.a), rb = load_report(a.b);
  const auto rows = eval::compare(ra, rb);
  const std::string text = eval::render_compare(rows, ra.model_id, rb.model_id);
  if (!a.out.empty()) write_file(a.out, text);
  std::cout << text;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Universal target speaker extraction: corpus synthesis, training, evaluation",
               "lgtse"};
  app.require_subcommand(1);
  std::string log_level = "info";
  int threads = 0;
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "write a synthetic corpus");
  s->add_option("--out", sim.out, "corpus directory")->required();
  sim.cfg.add_common(s);
  sim.o_speakers = s->add_option("--speakers", sim.speakers, "number of speakers (>= 2)");
  sim.o_utts = s->add_option("--utts", sim.utts, "utterances per speaker");
  sim.o_duration = s->add_option("--duration", sim.duration, "clip length in seconds");
  sim.o_rate = s->add_option("--rate", sim.rate, "sample rate in Hz");
  sim.o_noise = s->add_option("--noise-clips", sim.noise_clips, "noise clips (0 = one per utterance)");
  s->add_flag("--force", sim.force, "overwrite an existing corpus directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on a corpus");
  t->add_option("--corpus", tr.corpus, "corpus directory");
  t->add_option("--run-dir", tr.run_dir, "run directory")->required();
  tr.cfg.add_common(t);
  tr.cfg.add_training(t);
  t->add_flag("--resume", tr.resume, "continue from the latest checkpoint");
  t->add_flag("--force", tr.force, "discard an existing run in --run-dir");
  t->add_option("--stop-after-epochs", tr.stop_after)->group("");  // testing hook

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint or stub");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint directory");
  e->add_option("--run-dir", ev.run_dir, "run directory (latest checkpoint)");
  e->add_option("--stub", ev.stub, "identity | oracle");
  e->add_option("--corpus", ev.corpus, "corpus directory");
  e->add_option("--manifest", ev.manifest, "Libri2Mix-style CSV manifest");
  e->add_option("--split", ev.split, "heldout | train | all (synthetic corpora)");
  e->add_option("--conditions", ev.conditions, "comma list, e.g. 2spk,2spk+noise");
  e->add_option("--out", ev.out, "parent of the eval-<hash> directory");
  e->add_option("--format", ev.format, "stdout format: markdown | csv | text");
  e->add_flag("--no-stoi", ev.no_stoi, "skip STOI");
  e->add_flag("--no-probe", ev.no_probe, "skip the denoiser probe");
  ev.cfg.add_common(e);

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "per-condition deltas between two reports");
  c->add_option("a", cmp.a, "report.csv or eval directory")->required();
  c->add_option("b", cmp.b, "report.csv or eval directory")->required();
  c->add_option("--out", cmp.out, "also write the table here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    spdlog::set_default_logger(spdlog::stderr_color_mt("lgtse"));
  } catch (const spdlog::spdlog_ex&) {
    // Already registered by an earlier in-process run.
  }
  const auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*s) return cmd_simulate(sim);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    return cmd_compare(cmp);
  } catch (const Error& err) {
    spdlog::error("{}", err.what());
    return exit_code(err.kind());
  } catch (const fs::filesystem_error& err) {
    spdlog::error("{}", err.what());
    return kDataError;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return kDataError;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace lgtse::cli
