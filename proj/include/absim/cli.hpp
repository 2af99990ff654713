// Copyright 2026 The absim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `absim` command line. Kept in a header so tests can drive commands
// in-process; tools/absim.cpp is a two-line main.
#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "absim/harness.hpp"
#include "absim/remote.hpp"

namespace absim::cli {

namespace fs = std::filesystem;

// Exit statuses. Usage errors come from flag parsing; the rest mirror ErrorKind.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitUsage = 2;

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return 3;
    case ErrorKind::kMissingInput: return 4;
    case ErrorKind::kParse: return 5;
    case ErrorKind::kIntegrity: return 6;
    case ErrorKind::kConfig: return 7;
    case ErrorKind::kIllegalAction: return 8;
    case ErrorKind::kTransport: return 9;
    case ErrorKind::kInternal: return 10;
  }
  return kExitUnexpected;
}

inline const char* remedy(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return "check the flag values against --help";
    case ErrorKind::kMissingInput: return "check that the named path exists and is readable";
    case ErrorKind::kParse: return "fix the malformed line or document named above";
    case ErrorKind::kIntegrity: return "the inputs disagree with each other; regenerate or re-prepare them";
    case ErrorKind::kConfig: return "fix the configuration value named above";
    case ErrorKind::kIllegalAction: return "a policy produced an action outside the legal set";
    case ErrorKind::kTransport: return "check LLM_*/EMBED_* endpoints, credentials and network";
    case ErrorKind::kInternal: return "please report this with the run manifest";
  }
  return "";
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kInternal, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot read '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Writes via a temporary sibling and a rename so readers never see a torn file.
inline void write_atomic(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::kMissingInput, "cannot write '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, p);
}

/// Digest of a file, or of every regular file below a directory.
inline std::map<std::string, std::string> digest_inputs(const fs::path& p) {
  std::map<std::string, std::string> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file()) out[e.path().generic_string()] = sha256_hex(read_file(e.path()));
    }
  } else {
    out[p.generic_string()] = sha256_hex(read_file(p));
  }
  return out;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;

  /// Content-derived, so identical runs share an id.
  std::string run_id() const {
    json key = {{"command", command}, {"config", config}, {"inputs", inputs}};
    return sha256_hex(key.dump()).substr(0, 16);
  }

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "absim.manifest";
    j["run_id"] = run_id();
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = ordered_json::parse(config.dump());
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["duration_seconds"] = duration_seconds;
    return j;
  }
};

enum class LogLevel { kError, kWarn, kInfo, kDebug };

struct Globals {
  std::string out = "runs/latest";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string log_level = "warn";
  bool seed_given = false;
  bool workers_given = false;

  LogLevel level() const {
    if (log_level == "error") return LogLevel::kError;
    if (log_level == "info") return LogLevel::kInfo;
    if (log_level == "debug") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err, std::vector<std::string> argv)
      : g_(g), out_(out), err_(err), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

  const Globals& globals() const { return g_; }
  std::ostream& out() { return out_; }
  fs::path out_dir() const { return g_.out; }

  void log(LogLevel lvl, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (lvl <= g_.level()) err_ << "[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
  }
  std::function<void(const std::string&)> info_logger() {
    return [this](const std::string& m) { log(LogLevel::kInfo, m); };
  }

  void input(const fs::path& p) {
    for (auto& [k, v] : digest_inputs(p)) manifest_.inputs[k] = v;
  }
  /// Records and writes an output under --out.
  void output(const std::string& rel, std::string_view content) {
    write_atomic(out_dir() / rel, content);
    manifest_.outputs.push_back(rel);
  }
  void output_written(const std::string& rel) { manifest_.outputs.push_back(rel); }

  void finish(const std::string& command, const json& config) {
    manifest_.command = command;
    manifest_.argv = argv_;
    manifest_.config = config;
    manifest_.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_atomic(out_dir() / "manifest.json", manifest_.to_json().dump(2) + "\n");
  }

 private:
  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// Shared flag groups

struct DataFlags {
  std::string dir;  // ML-1M layout directory; synthetic when empty
  std::size_t interactions = 6000;

  void add(CLI::App* app, std::size_t default_interactions = 6000) {
    interactions = default_interactions;
    app->add_option("--data", dir, "ML-1M style directory (synthetic catalog when omitted)");
    app->add_option("--interactions", interactions, "interactions in the synthetic catalog")->capture_default_str();
  }

  DataSpec spec(Context& ctx) const {
    DataSpec d;
    d.seed = ctx.globals().seed;
    if (!dir.empty()) {
      d.source = "directory";
      d.path = dir;
      ctx.input(dir);
    } else {
      d.synthetic.interactions = interactions;
    }
    return d;
  }
};

inline std::unique_ptr<HttpTextGenerator> generator_from_env() {
  return std::make_unique<HttpTextGenerator>(RemoteConfig::from_env("LLM"));
}

struct EmbedderFlags {
  std::string kind = "deterministic";
  std::size_t dimension = 64;

  void add(CLI::App* app) {
    app->add_option("--embedder", kind, "deterministic | remote (EMBED_* environment)")
        ->check(CLI::IsMember({"deterministic", "remote"}))
        ->capture_default_str();
    app->add_option("--embed-dim", dimension, "embedding dimension")->capture_default_str();
  }

  std::unique_ptr<EmbeddingProvider> make(bool image) const {
    if (kind == "remote") return std::make_unique<RemoteEmbedder>(RemoteConfig::from_env("EMBED"), dimension, image);
    return std::make_unique<DeterministicEmbedder>(dimension);
  }
};

inline std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string opt_fixed(const std::optional<double>& v) { return v ? fixed(*v) : std::string("-"); }

/// Experiment config from --config, or the built-in Random/Pop/FM comparison.
inline ExperimentConfig default_experiment() {
  ExperimentConfig c;
  for (auto [name, kind] : {std::pair{"random", RecommenderKind::kRandom}, std::pair{"pop", RecommenderKind::kPopularity},
                            std::pair{"fm", RecommenderKind::kFm}}) {
    ArmSpec a;
    a.name = name;
    a.kind = kind;
    c.arms.push_back(a);
  }
  return c;
}

inline void apply_globals(ExperimentConfig& c, const Globals& g) {
  if (g.seed_given) {
    c.seed = g.seed;
    c.data.seed = g.seed;
  }
  if (g.workers_given) c.workers = g.workers;
}

inline void write_report(Context& ctx, const SimulationReport& report) {
  ctx.output("report.json", report.to_json().dump(2) + "\n");
  ctx.output("report.csv", report.to_csv());
  for (const auto& a : report.arms) {
    if (!a.trace_path.empty()) ctx.output_written(a.trace_path);
  }
  ctx.out() << report_table(json::parse(report.to_json().dump()));
  for (const auto& w : report.warnings) ctx.log(LogLevel::kWarn, w);
  for (const auto& a : report.arms) {
    if (a.error) ctx.log(LogLevel::kError, "arm " + a.name + ": " + *a.error);
  }
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_prepare(Context& ctx, const std::string& data, bool strict, const std::string& expected) {
  LoadOptions opts;
  opts.strict = strict;
  std::vector<LoadIssue> issues;
  ctx.input(data);
  const auto cat = load_catalog(CatalogPaths::in_directory(data), opts, &issues);
  for (const auto& i : issues) ctx.log(LogLevel::kWarn, i.describe());
  json expected_doc;
  if (!expected.empty()) {
    ctx.input(expected);
    try {
      expected_doc = json::parse(read_file(expected));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, expected + ": " + e.what());
    }
  }
  const auto stats = validate_stats(cat, expected.empty() ? nullptr : &expected_doc);
  const auto split = chronological_split(cat);
  for (const auto& w : split.warnings) ctx.log(LogLevel::kWarn, w);
  write_catalog(cat, ctx.out_dir() / "catalog");
  for (const char* f : {"catalog/movies.dat", "catalog/users.dat", "catalog/ratings.dat"}) ctx.output_written(f);
  std::ostringstream tr, va, te;
  auto dump = [](std::ostream& o, const std::vector<Interaction>& rows) {
    for (const auto& r : rows) o << r.user_id << "::" << r.movie_id << "::" << r.rating << "::" << r.timestamp << '\n';
  };
  dump(tr, split.train);
  dump(va, split.valid);
  dump(te, split.test);
  ctx.output("split/train.dat", tr.str());
  ctx.output("split/valid.dat", va.str());
  ctx.output("split/test.dat", te.str());
  ctx.output("stats.json", stats.to_json().dump(2) + "\n");
  ctx.out() << "users " << stats.user_count << ", movies " << stats.movie_count << ", interactions "
            << stats.interaction_count << ", sparsity " << fixed(stats.sparsity) << "\n";
  ctx.out() << "split train/valid/test: " << split.train.size() << "/" << split.valid.size() << "/"
            << split.test.size() << "\n";
  if (!stats.violations.empty() || !stats.deviations.empty()) {
    ctx.out() << stats.violations.size() << " violation(s), " << stats.deviations.size()
              << " deviation(s); see stats.json\n";
  }
  ctx.finish("prepare", {{"data", data}, {"strict", strict}, {"expected", expected}});
}

inline void cmd_synth(Context& ctx, const SyntheticSpec& spec) {
  const auto syn = generate_synthetic(spec, ctx.globals().seed);
  write_catalog(syn.catalog, ctx.out_dir());
  for (const char* f : {"movies.dat", "users.dat", "ratings.dat"}) ctx.output_written(f);
  if (fs::exists(ctx.out_dir() / "metadata.jsonl")) ctx.output_written("metadata.jsonl");
  ctx.out() << "wrote " << syn.catalog.users.size() << " users, " << syn.catalog.movies.size() << " movies, "
            << syn.catalog.interactions.size() << " interactions to " << ctx.out_dir().string() << "\n";
  ctx.finish("synth", {{"users", spec.users}, {"movies", spec.movies}, {"genres", spec.genres},
                       {"interactions", spec.interactions}, {"seed", ctx.globals().seed}});
}

inline void cmd_train(Context& ctx, const DataFlags& data, const ArmSpec& arm) {
  const auto spec = data.spec(ctx);
  const auto d = load_experiment_data(spec);
  auto rec = make_recommender(arm.kind, arm.fm);
  rec->fit(d.catalog, train_prefix(d.split.train, arm.train_fraction), derive_seed(ctx.globals().seed, 0x666974ull));
  save_checkpoint(*rec, ctx.out_dir() / "model.json");
  ctx.output_written("model.json");
  ctx.out() << "trained " << to_string(arm.kind) << " on " << d.split.train.size() << " train interactions\n";
  ctx.finish("train", {{"data", spec.to_json()}, {"arm", arm.to_json()}, {"seed", ctx.globals().seed}});
}

inline void cmd_eval_offline(Context& ctx, const DataFlags& data, const std::string& model, std::size_t k) {
  const auto spec = data.spec(ctx);
  const auto d = load_experiment_data(spec);
  ctx.input(model);
  const auto rec = load_checkpoint(model);
  const auto m = offline_eval(*rec, d.split, k);
  ordered_json j;
  j["model"] = model;
  j["k"] = k;
  j["users"] = m.users;
  j["recall_at_k"] = m.recall;
  j["ndcg_at_k"] = m.ndcg;
  ctx.output("offline.json", j.dump(2) + "\n");
  ctx.out() << "Recall@" << k << " " << fixed(m.recall) << "  NDCG@" << k << " " << fixed(m.ndcg) << "  over "
            << m.users << " users\n";
  ctx.finish("eval-offline", {{"data", spec.to_json()}, {"model", model}, {"k", k}});
}

inline ExperimentConfig load_config(Context& ctx, const std::string& path) {
  if (path.empty()) return default_experiment();
  ctx.input(path);
  return ExperimentConfig::load(path);
}

inline SimulationReport run_with_env(Context& ctx, const ExperimentConfig& config, const EmbedderFlags& emb) {
  const auto data = load_experiment_data(config.data);
  if (config.data.source == "directory") ctx.input(config.data.path);
  for (const auto& a : config.arms) {
    if (a.kind == RecommenderKind::kExternal) ctx.input(a.external_path);
  }
  std::unique_ptr<HttpTextGenerator> gen;
  if (config.policy.kind == PolicyKind::kLlm) gen = generator_from_env();
  const auto text = emb.make(false);
  const auto image = emb.make(true);
  RunOptions opts;
  opts.out_dir = ctx.out_dir();
  opts.generator = gen.get();
  opts.text_embedder = text.get();
  opts.image_embedder = image.get();
  opts.log = ctx.info_logger();
  return run_experiment(config, data, opts);
}

inline void cmd_abtest(Context& ctx, const std::string& config_path, const EmbedderFlags& emb) {
  auto config = load_config(ctx, config_path);
  apply_globals(config, ctx.globals());
  config.validate();
  const auto report = run_with_env(ctx, config, emb);
  write_report(ctx, report);
  ctx.finish("abtest", config.to_json());
}

inline void cmd_simulate(Context& ctx, const std::string& config_path, UserId user, const std::string& arm,
                         const std::string& policy, const std::string& vision, const EmbedderFlags& emb) {
  auto config = load_config(ctx, config_path);
  apply_globals(config, ctx.globals());
  std::vector<ArmSpec> kept;
  for (const auto& a : config.arms) {
    if (a.name == arm) kept.push_back(a);
  }
  if (kept.empty()) throw Error(ErrorKind::kInvalidArgument, "no arm named '" + arm + "' in the configuration");
  config.arms = kept;
  config.cohort.users = {user};
  config.policy.kind = policy == "llm" ? PolicyKind::kLlm : PolicyKind::kRule;
  config.sandbox.vision_enabled = vision == "on";
  config.validate();
  const auto report = run_with_env(ctx, config, emb);
  write_report(ctx, report);
  for (const auto& s : report.arms.front().sessions) {
    for (const auto& e : s.events) ctx.out() << e.to_json().dump() << '\n';
  }
  ctx.finish("simulate", config.to_json());
}

inline void cmd_align_taste(Context& ctx, const DataFlags& data) {
  const auto spec = data.spec(ctx);
  const auto d = load_experiment_data(spec);
  TasteOptions opts;
  opts.seed = ctx.globals().seed;
  const auto r = taste_alignment_study(d.catalog, d.split, opts);
  ctx.output("taste.json", r.to_json().dump(2) + "\n");
  ctx.out() << "ratio   CTR     CVR     AR      (" << r.eligible_users << " users, " << r.skipped_users
            << " skipped)\n";
  for (const auto& [ratio, m] : r.per_ratio) {
    ctx.out() << ratio.label() << std::string(ratio.label().size() < 8 ? 8 - ratio.label().size() : 1, ' ')
              << opt_fixed(m.ctr) << "  " << opt_fixed(m.cvr) << "  " << opt_fixed(m.ar) << "\n";
  }
  ctx.finish("align-taste", {{"data", spec.to_json()}, {"seed", opts.seed}});
}

inline void cmd_align_activity(Context& ctx, const DataFlags& data, bool null_config) {
  const auto spec = data.spec(ctx);
  const auto d = load_experiment_data(spec);
  ActivityOptions opts;
  opts.seed = ctx.globals().seed;
  opts.force_medium = null_config;
  const auto r = activity_trait_study(d.catalog, d.split, opts);
  ctx.output("activity.json", r.to_json().dump(2) + "\n");
  for (const auto& g : r.groups) {
    ctx.out() << to_string(g.trait) << ": " << g.clicks.size() << " sessions, mean clicks " << fixed(g.mean, 3)
              << "\n";
  }
  const char* pairs[] = {"low-medium", "low-high", "medium-high"};
  for (std::size_t i = 0; i < 3; ++i) {
    ctx.out() << "KS " << pairs[i] << ": D=" << fixed(r.ks[i].statistic) << " p=" << r.ks[i].p_value << "\n";
  }
  ctx.finish("align-activity", {{"data", spec.to_json()}, {"seed", opts.seed}, {"null", null_config}});
}

inline void cmd_export(Context& ctx, const std::string& traces, const std::string& format_name,
                       const std::string& merge_dir, int click_rating) {
  const auto format = parse_export_format(format_name);
  std::vector<TraceSession> sessions;
  for (const auto& f : trace_files(traces)) {
    ctx.input(f);
    auto part = read_trace(f);
    sessions.insert(sessions.end(), part.begin(), part.end());
  }
  const auto records = augmented_records(sessions);
  std::ostringstream body;
  const auto counts = export_augmented(records, format, body, click_rating);
  const std::string name = format == ExportFormat::kInteractions ? "augmented.dat" : "augmented.jsonl";
  ctx.output(name, body.str());
  if (!merge_dir.empty()) {
    if (format != ExportFormat::kInteractions) {
      throw Error(ErrorKind::kInvalidArgument, "--merge-with needs --format interactions");
    }
    ctx.input(merge_dir);
    const auto paths = CatalogPaths::in_directory(merge_dir);
    ctx.output("merged/movies.dat", read_file(paths.movies));
    ctx.output("merged/users.dat", read_file(paths.users));
    if (paths.metadata) ctx.output("merged/metadata.jsonl", read_file(*paths.metadata));
    ctx.output("merged/ratings.dat", read_file(paths.interactions) + body.str());
    // Referential check: the merged catalog must load cleanly.
    LoadOptions strict;
    strict.strict = true;
    load_catalog(CatalogPaths::in_directory(ctx.out_dir() / "merged"), strict);
  }
  ctx.out() << "click records " << counts.clicks << ", view records " << counts.views << "\n";
  if (counts.collisions) {
    ctx.log(LogLevel::kWarn, std::to_string(counts.collisions) +
                                 " record(s) repeat a (user, movie, timestamp) key from another trace; kept the first");
  }
  ctx.finish("export-augmented", {{"traces", traces}, {"format", format_name}, {"merge_with", merge_dir},
                                  {"click_rating", click_rating}});
}

inline void cmd_report(Context& ctx, const std::string& report_path, const std::string& csv) {
  ctx.input(report_path);
  json report;
  try {
    report = json::parse(read_file(report_path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, report_path + ": " + e.what());
  }
  if (report.value("format", std::string()) != "absim.report") {
    throw Error(ErrorKind::kParse, report_path + ": not an absim report");
  }
  const auto table = report_table(report);
  ctx.out() << table;
  ctx.output("report.txt", table);
  if (!csv.empty()) {
    std::ostringstream out;
    out << "arm,CTR,CVR,AR,Recall@20,NDCG@20\n";
    for (const auto& a : report.at("arms")) {
      auto cell = [](const json& o, const char* k) {
        return o.contains(k) && !o[k].is_null() ? fixed(o[k].get<double>(), 6) : std::string();
      };
      out << a.at("name").get<std::string>();
      if (a.contains("metrics")) {
        out << ',' << cell(a["metrics"], "ctr") << ',' << cell(a["metrics"], "cvr") << ',' << cell(a["metrics"], "ar");
      } else {
        out << ",,,";
      }
      out << ',' << cell(a, "recall_at_k") << ',' << cell(a, "ndcg_at_k") << '\n';
    }
    ctx.output(csv, out.str());
  }
  ctx.finish("report", {{"report", report_path}, {"csv", csv}});
}

// ---------------------------------------------------------------------------
// Dispatch

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"absim: agent-based simulation of recommender A/B tests"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Globals g;
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  auto* workers_opt = app.add_option("--workers", g.workers, "session worker threads")->capture_default_str();
  app.add_option("--log-level", g.log_level, "error | warn | info | debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->capture_default_str();

  std::function<void(Context&)> action;

  auto* prepare = app.add_subcommand("prepare", "load ML-1M files, validate, split chronologically");
  std::string prep_data, prep_expected;
  bool prep_strict = false;
  prepare->add_option("--data", prep_data, "directory with movies.dat, users.dat, ratings.dat")->required();
  prepare->add_option("--expected-stats", prep_expected, "stats JSON to compare against");
  prepare->add_flag("--strict", prep_strict, "abort on any malformed row")->capture_default_str();
  prepare->callback([&] { action = [&](Context& c) { cmd_prepare(c, prep_data, prep_strict, prep_expected); }; });

  auto* synth = app.add_subcommand("synth", "generate a synthetic catalog in ML-1M layout");
  SyntheticSpec sspec;
  synth->add_option("--users", sspec.users, "users")->capture_default_str();
  synth->add_option("--movies", sspec.movies, "movies")->capture_default_str();
  synth->add_option("--genres", sspec.genres, "genres")->capture_default_str();
  synth->add_option("--interactions", sspec.interactions, "interactions")->capture_default_str();
  synth->add_option("--style-strength", sspec.style_strength, "weight of latent style in ratings")
      ->capture_default_str();
  synth->callback([&] { action = [&](Context& c) { cmd_synth(c, sspec); }; });

  auto* train = app.add_subcommand("train", "fit a recommender and write a checkpoint");
  DataFlags train_data;
  train_data.add(train);
  ArmSpec train_arm;
  std::string train_kind = "fm", train_schema = "all";
  train->add_option("--model", train_kind, "random | popularity | fm")
      ->check(CLI::IsMember({"random", "popularity", "fm"}))
      ->capture_default_str();
  train->add_option("--schema", train_schema, "FM features: all | item_side | ids")
      ->check(CLI::IsMember({"all", "item_side", "ids"}))
      ->capture_default_str();
  train->add_option("--train-fraction", train_arm.train_fraction, "chronological prefix of train")
      ->capture_default_str();
  train->add_option("--epochs", train_arm.fm.epochs, "FM epochs")->capture_default_str();
  train->add_option("--lr", train_arm.fm.learning_rate, "FM learning rate")->capture_default_str();
  train->add_option("--latent-dim", train_arm.fm.latent_dim, "FM latent dimension")->capture_default_str();
  train->callback([&] {
    action = [&](Context& c) {
      train_arm.kind = parse_recommender_kind(train_kind);
      train_arm.fm.schema = FeatureSchema::parse(train_schema);
      train_arm.name = train_kind;
      cmd_train(c, train_data, train_arm);
    };
  });

  auto* eval = app.add_subcommand("eval-offline", "Recall@K and NDCG@K of a checkpoint on the test split");
  DataFlags eval_data;
  eval_data.add(eval);
  std::string eval_model;
  std::size_t eval_k = 20;
  eval->add_option("--model", eval_model, "checkpoint written by train")->required();
  eval->add_option("-k,--k", eval_k, "cutoff")->capture_default_str();
  eval->callback([&] { action = [&](Context& c) { cmd_eval_offline(c, eval_data, eval_model, eval_k); }; });

  auto* simulate = app.add_subcommand("simulate", "run one user's sessions against one arm");
  std::string sim_config, sim_arm = "fm", sim_policy = "rule", sim_vision = "on";
  UserId sim_user = 1;
  EmbedderFlags sim_emb;
  simulate->add_option("--config", sim_config, "experiment config JSON (built-in random/pop/fm when omitted)");
  simulate->add_option("--user", sim_user, "user id")->capture_default_str();
  simulate->add_option("--arm", sim_arm, "arm name")->capture_default_str();
  simulate->add_option("--policy", sim_policy, "rule | llm (LLM_* environment)")
      ->check(CLI::IsMember({"rule", "llm"}))
      ->capture_default_str();
  simulate->add_option("--vision", sim_vision, "on | off")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  sim_emb.add(simulate);
  simulate->callback([&] {
    action = [&](Context& c) { cmd_simulate(c, sim_config, sim_user, sim_arm, sim_policy, sim_vision, sim_emb); };
  });

  auto* abtest = app.add_subcommand("abtest", "run every arm of an experiment over a paired cohort");
  std::string ab_config;
  EmbedderFlags ab_emb;
  abtest->add_option("--config", ab_config, "experiment config JSON (built-in random/pop/fm when omitted)");
  ab_emb.add(abtest);
  abtest->callback([&] { action = [&](Context& c) { cmd_abtest(c, ab_config, ab_emb); }; });

  auto* taste = app.add_subcommand("align-taste", "CTR/CVR/AR under 1:9, 1:4 and 1:1 positive:negative lists");
  DataFlags taste_data;
  taste_data.add(taste, 12000);
  taste->callback([&] { action = [&](Context& c) { cmd_align_taste(c, taste_data); }; });

  auto* activity = app.add_subcommand("align-activity", "click distributions per activity trait");
  DataFlags act_data;
  act_data.add(activity);
  bool act_null = false;
  activity->add_flag("--null", act_null, "force every agent to the medium trait")->capture_default_str();
  activity->callback([&] { action = [&](Context& c) { cmd_align_activity(c, act_data, act_null); }; });

  auto* exp = app.add_subcommand("export-augmented", "turn simulated clicks and views into training data");
  std::string exp_traces, exp_format = "interactions", exp_merge;
  int exp_click_rating = 3;
  exp->add_option("--traces", exp_traces, "trace file or directory of *.jsonl traces")->required();
  exp->add_option("--format", exp_format, "interactions | labeled")
      ->check(CLI::IsMember({"interactions", "labeled"}))
      ->capture_default_str();
  exp->add_option("--merge-with", exp_merge, "ML-1M directory to append the records to");
  exp->add_option("--click-rating", exp_click_rating, "rating written for click records")
      ->check(CLI::Range(1, 5))
      ->capture_default_str();
  exp->callback([&] { action = [&](Context& c) { cmd_export(c, exp_traces, exp_format, exp_merge, exp_click_rating); }; });

  auto* rep = app.add_subcommand("report", "render a stored report as a table");
  std::string rep_path, rep_csv;
  rep->add_option("--report", rep_path, "report.json from abtest or simulate")->required();
  rep->add_option("--csv", rep_csv, "also write a delimited table (relative to --out)");
  rep->callback([&] { action = [&](Context& c) { cmd_report(c, rep_path, rep_csv); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kExitOk;
    err << "remedy: run with --help for usage\n";
    return kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;
  g.workers_given = workers_opt->count() > 0;

  std::vector<std::string> args(argv + 1, argv + argc);
  Context ctx(g, out, err, args);
  try {
    action(ctx);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\nremedy: " << remedy(e.kind()) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
  return kExitOk;
}

}  // namespace absim::cli
