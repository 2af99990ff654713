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

// Acceptance runner. Prints one line per criterion:
//
//   criterion N: PASS|FAIL|SKIP - detail (elapsed)
//
// A criterion fails when its check fails or when it overruns its time
// budget. --known-failing declares criteria expected to fail; the exit
// status is 0 only when the set of failures equals that declaration, so a
// criterion that starts passing must be removed from the list too.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "absim/cli.hpp"
#include "oracles.hpp"

namespace absim::acceptance {
namespace {

namespace fs = std::filesystem;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kPass;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::kFail, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(d)}; }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

constexpr int kSeeds = 5;

// ---------------------------------------------------------------------------
// 1. Fatigue arithmetic

Outcome fatigue_arithmetic(const fs::path&) {
  const auto c = FatigueConfig::preset("mini-column");
  std::vector<std::string> bad;
  auto s = apply_fatigue(FatigueState{0.0, 30.0}, fatigue_cost(c, ActionKind::kClick, 4));
  if (s.accumulated != 2.0 || s.reading() != "2.0/30") bad.push_back("click gave " + s.reading());
  s = apply_fatigue(FatigueState{9.5, 30.0}, fatigue_cost(c, ActionKind::kWatchAndRate, 5));
  if (s.accumulated != 19.5 || s.reading() != "19.5/30") bad.push_back("watch gave " + s.reading());
  s = apply_fatigue(FatigueState{25.4, 30.0}, 4.6);
  if (s.reading() != "30.0/30" || !s.exhausted()) bad.push_back("25.4 + 4.6 gave " + s.reading());

  // A scripted session spending exactly the budget ends in a fatigue exit.
  Catalog cat;
  for (MovieId m = 1; m <= 20; ++m) {
    Movie mv;
    mv.movie_id = m;
    mv.title = "M" + std::to_string(m);
    mv.genres = {"Drama"};
    cat.movies.emplace(m, mv);
  }
  User u;
  u.user_id = 1;
  cat.users.emplace(1, u);
  const Sandbox sandbox(cat, SandboxConfig{});
  class Script final : public Policy {
   public:
    PolicyKind kind() const override { return PolicyKind::kRule; }
    Decision decide(const DecisionContext&) const override {
      static const std::vector<Action> plan = {Action::click(1), Action::watch_and_rate(5), Action::back(),
                                               Action::click(2), Action::back(), Action::next_page(),
                                               Action::next_page(), Action::prev_page()};
      return {i_ < plan.size() ? plan[i_++] : Action::exit(), 3, ""};
    }
    mutable std::size_t i_ = 0;
  } script;
  Profile profile;
  profile.user_id = 1;
  SessionSpec spec;
  spec.session_id = "fatigue";
  spec.ranked.user_id = 1;
  spec.ranked.items.resize(20);
  std::iota(spec.ranked.items.begin(), spec.ranked.items.end(), 1);
  LongTermMemory mem(1);
  const auto out = run_session(profile, script, sandbox, mem, c, spec);
  if (out.fatigue.reading() != "30.0/30" || out.state.terminated != TerminationReason::kFatigueExhausted ||
      out.decisions.size() != 8) {
    bad.push_back("scripted session ended at " + out.fatigue.reading() + " after " +
                  std::to_string(out.decisions.size()) + " decisions");
  }
  if (!bad.empty()) return fail(bad.front());
  return pass("0.0->2.0, 9.5->19.5, 25.4+4.6=30.0/30 exhausted; scripted session exits on fatigue at 30.0/30");
}

// ---------------------------------------------------------------------------
// 2. Cost formula properties

Outcome fatigue_properties(const fs::path&) {
  Rng rng(2026);
  for (int t = 0; t < 1000; ++t) {
    FatigueConfig c;
    c.phi_min = rng.uniform(0.05, 2.0);
    c.phi_max = t % 5 == 0 ? c.phi_min : c.phi_min + rng.uniform(0.0, 3.0);
    c.interest_min = static_cast<int>(rng.below(3));
    c.interest_max = c.interest_min + 1 + static_cast<int>(rng.below(8));
    const auto kind = kAllActionKinds[rng.below(kAllActionKinds.size())];
    c.base_cost[kind] = rng.uniform(0.0, 50.0);
    const double ca = c.base_cost[kind], lo = ca * c.phi_min, hi = ca * c.phi_max;
    const double eps = 1e-9 * std::max(1.0, hi);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = c.interest_min; i <= c.interest_max; ++i) {
      const double f = fatigue_cost(c, kind, i);
      if (f < lo - eps || f > hi + eps) return fail("triple " + std::to_string(t) + ": F out of bounds");
      if (f > prev + eps) return fail("triple " + std::to_string(t) + ": F increases with interest");
      prev = f;
    }
    if (fatigue_cost(c, kind, c.interest_min) != hi) return fail("triple " + std::to_string(t) + ": F(i_min) != Ca*phi_max");
    if (std::fabs(fatigue_cost(c, kind, c.interest_max) - lo) > eps) {
      return fail("triple " + std::to_string(t) + ": F(i_max) != Ca*phi_min");
    }
  }
  return pass("1000 fuzzed configurations: bounded, non-increasing, endpoints exact");
}

// ---------------------------------------------------------------------------
// 3. Metric recount

Catalog fuzz_catalog(int movies) {
  Catalog cat;
  const char* genres[] = {"Action", "Comedy", "Drama", "Horror"};
  for (MovieId m = 1; m <= movies; ++m) {
    Movie mv;
    mv.movie_id = m;
    mv.title = "Movie " + std::to_string(m);
    mv.genres = {genres[m % 4]};
    mv.imdb_rating = 5.0 + m % 5;
    mv.poster_ref = std::to_string(m) + (m % 2 ? "_warm_bright" : "_cool_dark");
    cat.movies.emplace(m, mv);
  }
  for (UserId u = 1; u <= 3; ++u) {
    User usr;
    usr.user_id = u;
    cat.users.emplace(u, usr);
  }
  return cat;
}

RankedList fuzz_list(Rng& rng, int movies, std::size_t n) {
  RankedList r;
  r.user_id = 1;
  std::vector<MovieId> all(static_cast<std::size_t>(movies));
  std::iota(all.begin(), all.end(), 1);
  rng.shuffle(all);
  r.items.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  return r;
}

Outcome metric_oracle(const fs::path&) {
  const auto cat = fuzz_catalog(60);
  const Sandbox sandbox(cat, SandboxConfig{});
  Rng rng(303);
  std::vector<Event> merged;
  for (int t = 0; t < 100; ++t) {
    const auto list = fuzz_list(rng, 60, 5 + rng.below(16));
    auto [state, problems] = oracle::random_walk(sandbox, list, "m" + std::to_string(t), rng);
    if (!problems.empty()) return fail("session " + std::to_string(t) + ": " + problems.front());
    merged.insert(merged.end(), state.events.begin(), state.events.end());
    for (const auto* log : {&state.events, &merged}) {
      const auto m = compute_metrics(*log);
      const auto r = oracle::recount(*log);
      if (m.ctr != r.ctr() || m.cvr != r.cvr() || m.ar != r.ar() || m.impressions != r.impressed) {
        return fail("session " + std::to_string(t) + ": harness metrics differ from recount");
      }
      if (m.cvr && m.ctr && *m.cvr > *m.ctr) return fail("session " + std::to_string(t) + ": cvr > ctr");
    }
  }
  const auto m = compute_metrics(merged);
  return pass("100 fuzzed sessions and their running merge match the recount exactly (merged ctr " + fmt(*m.ctr) +
              ", cvr " + fmt(*m.cvr) + ")");
}

// ---------------------------------------------------------------------------
// 4 and 5. Arm orderings on the synthetic fixture

ExperimentConfig fixture_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.data.seed = seed;
  c.data.synthetic.users = 200;
  c.data.synthetic.movies = 300;
  c.data.synthetic.interactions = 6000;
  return c;
}

ArmSpec arm(std::string name, RecommenderKind kind, double fraction = 1.0) {
  ArmSpec a;
  a.name = std::move(name);
  a.kind = kind;
  a.train_fraction = fraction;
  return a;
}

Outcome model_ranking(const fs::path&) {
  int ok = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    auto c = fixture_config(static_cast<std::uint64_t>(seed));
    c.arms = {arm("random", RecommenderKind::kRandom), arm("pop", RecommenderKind::kPopularity),
              arm("fm", RecommenderKind::kFm)};
    const auto report = run_experiment(c, load_experiment_data(c.data));
    const double tau = report.kendall_ctr_recall.value_or(-2.0);
    ok += tau == 1.0;
    detail += " seed " + std::to_string(seed) + ": tau " + fmt(tau, 2) + " (ctr";
    for (const auto& a : report.arms) detail += " " + fmt(a.metrics.ctr.value_or(-1));
    detail += ");";
  }
  return check(ok >= 4, std::to_string(ok) + "/5 seeds with tau 1.0;" + detail);
}

Outcome data_scale(const fs::path&) {
  int ctr_ok = 0, recall_ok = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    auto c = fixture_config(static_cast<std::uint64_t>(seed));
    c.arms = {arm("fm-50", RecommenderKind::kFm, 0.5), arm("fm-75", RecommenderKind::kFm, 0.75),
              arm("fm-100", RecommenderKind::kFm)};
    const auto report = run_experiment(c, load_experiment_data(c.data));
    std::vector<double> ctr, recall;
    for (const auto& a : report.arms) {
      ctr.push_back(a.metrics.ctr.value_or(-1));
      recall.push_back(a.offline ? a.offline->recall : -1);
    }
    ctr_ok += ctr[0] <= ctr[1] && ctr[1] <= ctr[2];
    recall_ok += recall[0] <= recall[1] && recall[1] <= recall[2];
    detail += " seed " + std::to_string(seed) + ": ctr " + fmt(ctr[0]) + "/" + fmt(ctr[1]) + "/" + fmt(ctr[2]) +
              " recall " + fmt(recall[0], 3) + "/" + fmt(recall[1], 3) + "/" + fmt(recall[2], 3) + ";";
  }
  return check(ctr_ok >= 4 && recall_ok >= 4, "ctr non-decreasing in " + std::to_string(ctr_ok) +
                                                  "/5 seeds, recall non-decreasing in " + std::to_string(recall_ok) +
                                                  "/5;" + detail);
}

// ---------------------------------------------------------------------------
// 6. Feature ablation (offline)

Outcome feature_ablation(const fs::path&) {
  int ok = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto data = load_experiment_data(fixture_config(static_cast<std::uint64_t>(seed)).data);
    std::vector<double> recall;
    for (const auto& schema : {FeatureSchema::all(), FeatureSchema::item_side(), FeatureSchema::ids_only()}) {
      FmParams p;
      p.schema = schema;
      FmRecommender fm(p);
      fm.fit(data.catalog, data.split.train, derive_seed(static_cast<std::uint64_t>(seed), 0x666974ull));
      recall.push_back(offline_eval(fm, data.split, 20).recall);
    }
    ok += recall[0] >= recall[1] && recall[1] >= recall[2];
    detail += " seed " + std::to_string(seed) + ": " + fmt(recall[0], 3) + "/" + fmt(recall[1], 3) + "/" +
              fmt(recall[2], 3) + ";";
  }
  return check(ok >= 4, "all >= item-side >= ids in " + std::to_string(ok) + "/5 seeds (Recall@20 all/item/ids);" +
                            detail);
}

// ---------------------------------------------------------------------------
// 7 and 8. Alignment studies

Outcome taste_alignment(const fs::path&) {
  int ok = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    SyntheticSpec spec;
    spec.interactions = 12000;  // enough held-out positives for the 1:1 lists
    const auto cat = generate_synthetic(spec, static_cast<std::uint64_t>(seed)).catalog;
    const auto split = chronological_split(cat);
    TasteOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    const auto r = taste_alignment_study(cat, split, o);
    std::map<std::size_t, Metrics> by_pos;
    for (const auto& [ratio, m] : r.per_ratio) by_pos[ratio.positives] = m;
    const double c19 = by_pos[2].ctr.value_or(-1), c14 = by_pos[4].ctr.value_or(-1), c11 = by_pos[10].ctr.value_or(-1);
    const double a19 = by_pos[2].ar.value_or(0), a11 = by_pos[10].ar.value_or(0);
    ok += c11 > c14 && c14 > c19 && a11 >= a19;
    detail += " seed " + std::to_string(seed) + ": ctr " + fmt(c19) + "<" + fmt(c14) + "<" + fmt(c11) + " ar " +
              fmt(a19, 2) + "/" + fmt(a11, 2) + " control " + fmt(by_pos[0].ctr.value_or(-1)) + " users " +
              std::to_string(r.eligible_users) + ";";
  }
  return check(ok == kSeeds, std::to_string(ok) + "/5 seeds ordered;" + detail);
}

Outcome activity_traits(const fs::path&) {
  int ordered = 0, null_ok = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto data = load_experiment_data(fixture_config(static_cast<std::uint64_t>(seed)).data);
    ActivityOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    const auto r = activity_trait_study(data.catalog, data.split, o);
    o.force_medium = true;
    const auto n = activity_trait_study(data.catalog, data.split, o);
    ordered += r.groups[0].mean < r.groups[1].mean && r.groups[1].mean < r.groups[2].mean;
    double min_p = 1.0;
    for (const auto& k : n.ks) min_p = std::min(min_p, k.p_value);
    null_ok += min_p > 0.01;
    detail += " seed " + std::to_string(seed) + ": " + fmt(r.groups[0].mean, 2) + "<" + fmt(r.groups[1].mean, 2) + "<" +
              fmt(r.groups[2].mean, 2) + " null min p " + fmt(min_p, 3) + ";";
  }
  return check(ordered == kSeeds && null_ok == kSeeds, "ordered in " + std::to_string(ordered) +
                                                           "/5 seeds, null indistinguishable in " +
                                                           std::to_string(null_ok) + "/5;" + detail);
}

// ---------------------------------------------------------------------------
// 9. Sandbox state machine

Outcome sandbox_fuzz(const fs::path&) {
  const auto cat = fuzz_catalog(60);
  Rng rng(909);
  std::size_t events = 0;
  for (int t = 0; t < 1000; ++t) {
    SandboxConfig cfg;
    cfg.page_size = 1 + rng.below(6);
    cfg.k = cfg.page_size + rng.below(20);
    cfg.step_cap = 5 + rng.below(60);
    cfg.vision_enabled = rng.below(2) == 0;
    const Sandbox sandbox(cat, cfg);
    const auto list = fuzz_list(rng, 60, cfg.page_size + rng.below(cfg.k));
    auto [state, problems] = oracle::random_walk(sandbox, list, "f" + std::to_string(t), rng);
    const auto where = "walk " + std::to_string(t) + ": ";
    if (!problems.empty()) return fail(where + problems.front());
    if (auto v = oracle::session_violations(state.events); !v.empty()) return fail(where + v.front());
    const auto replayed = sandbox.replay(state.events, state.ranked, state.user_id, state.arm_id);
    if (!(replayed == state)) return fail(where + "replay does not reproduce the state");
    if (!(sandbox.replay(replayed.events, replayed.ranked, replayed.user_id, replayed.arm_id) == replayed)) {
      return fail(where + "replay is not a fixed point");
    }
    events += state.events.size();
  }
  return pass("1000 fuzzed sessions (" + std::to_string(events) +
              " events): accounting, click-before-watch, no post-exit events, illegal probes rejected, replay fixed point");
}

// ---------------------------------------------------------------------------
// 10. Retrieval

Outcome retrieval(const fs::path&) {
  Rng rng(1010);
  std::size_t largest = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = t == 0 ? 5000 : rng.below(5001);
    largest = std::max(largest, n);
    const std::size_t dim = 1 + rng.below(16);
    // A small vector pool and coarse timestamps force many exact ties.
    std::vector<Embedding> pool(1 + rng.below(t % 2 ? 12 : 400));
    for (auto& v : pool) {
      v.resize(dim);
      for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    }
    LongTermMemory mem(1);
    for (std::size_t i = 0; i < n; ++i) {
      MemoryRecord r;
      r.modality = rng.below(3) ? Modality::kText : Modality::kImage;
      r.user_id = 1;
      r.movie_id = static_cast<MovieId>(1 + rng.below(40));
      r.session_id = "s";
      r.timestamp = static_cast<std::int64_t>(rng.below(30));
      r.embedding = pool[rng.below(pool.size())];
      r.payload = "p";
      mem.add(std::move(r));
    }
    for (int q = 0; q < 4; ++q) {
      Query query{rng.below(2) ? Modality::kText : Modality::kImage, pool[rng.below(pool.size())], 1 + rng.below(25)};
      std::vector<std::size_t> got;
      for (const auto& h : mem.retrieve(query)) got.push_back(static_cast<std::size_t>(h.record - mem.records().data()));
      if (got != oracle::top_k(mem.records(), query)) {
        return fail("store " + std::to_string(t) + " (" + std::to_string(n) + " records): retrieval differs from scan");
      }
    }
  }
  return pass("50 fuzzed stores up to " + std::to_string(largest) + " records, 200 queries match the exhaustive scan");
}

// ---------------------------------------------------------------------------
// 11. End-to-end determinism

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::vector<const char*> argv = {"absim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism(const fs::path& work) {
  const auto config = fs::path(ABSIM_SOURCE_DIR) / "configs" / "abtest.json";
  std::string out1, out2;
  const auto d1 = work / "determinism" / "r1", d2 = work / "determinism" / "r2";
  fs::remove_all(work / "determinism");
  if (run_cli({"--out", d1.string(), "abtest", "--config", config.string()}, &out1) != 0 ||
      run_cli({"--out", d2.string(), "abtest", "--config", config.string()}, &out2) != 0) {
    return fail("abtest exited non-zero");
  }
  std::vector<fs::path> files = {"report.json", "report.csv"};
  for (const auto& f : trace_files(d1 / "traces")) files.push_back(fs::relative(f, d1));
  for (const auto& f : files) {
    const auto a = slurp(d1 / f), b = slurp(d2 / f);
    if (a.empty() || a != b) return fail(f.string() + " differs between runs");
  }
  if (out1 != out2) return fail("printed tables differ");
  const auto m1 = json::parse(slurp(d1 / "manifest.json")), m2 = json::parse(slurp(d2 / "manifest.json"));
  if (m1["run_id"] != m2["run_id"]) return fail("manifest run ids differ");
  return pass(std::to_string(files.size()) + " artifacts byte-identical across two runs of configs/abtest.json");
}

// ---------------------------------------------------------------------------
// 12. Real data

Outcome real_data(const fs::path&) {
  const char* dir = std::getenv("ABSIM_ML1M_DIR");
  if (!dir || !*dir) return {Verdict::kSkip, "ABSIM_ML1M_DIR not set"};
  const auto cat = load_catalog(fs::path(dir));
  const auto stats = validate_stats(cat);
  return check(stats.user_count == 6040 && stats.movie_count == 3952 && std::fabs(stats.sparsity - 0.0419) <= 1e-4,
               std::to_string(stats.user_count) + " users, " + std::to_string(stats.movie_count) + " movies, sparsity " +
                   fmt(stats.sparsity));
}

// ---------------------------------------------------------------------------
// 13. Augmentation export

Outcome augmentation(const fs::path& work) {
  const auto dir = work / "augmentation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SyntheticSpec spec;
  spec.users = 10;
  spec.movies = 40;
  spec.interactions = 200;
  const auto syn = generate_synthetic(spec, 13);
  write_catalog(syn.catalog, dir / "catalog");

  // A scripted session: three clicks, one of them watched and rated 5.
  const Sandbox sandbox(syn.catalog, SandboxConfig{});
  RankedList list;
  list.user_id = 1;
  for (const auto& [m, _] : syn.catalog.movies) {
    if (list.items.size() < 20) list.items.push_back(m);
  }
  auto [state, obs] = sandbox.start_session("aug", 1, "scripted", list, 2000000000);
  const auto& items = list.items;
  for (const auto& a : {Action::click(items[0]), Action::back(), Action::click(items[1]), Action::watch_and_rate(5),
                        Action::back(), Action::next_page(), Action::click(items[5]), Action::back(), Action::exit()}) {
    sandbox.step(state, a);
  }
  SessionRecord rec;
  rec.user_id = 1;
  rec.ranked = list;
  rec.events = state.events;
  {
    std::ofstream out(dir / "trace.jsonl");
    write_trace(out, "scripted", {rec});
  }
  const auto records = augmented_records(read_trace(dir / "trace.jsonl"));
  std::ostringstream body;
  const auto counts = export_augmented(records, ExportFormat::kInteractions, body);
  const auto views = std::count_if(records.begin(), records.end(),
                                   [](const AugmentedRecord& r) { return r.signal == Signal::kView && r.rating == 5; });
  if (counts.clicks != 3 || counts.views != 1 || views != 1) {
    return fail("expected 3 clicks and 1 view rated 5, got " + std::to_string(counts.clicks) + " and " +
                std::to_string(counts.views));
  }
  {
    std::ofstream out(dir / "catalog" / "ratings.dat", std::ios::app);
    out << body.str();
  }
  std::vector<LoadIssue> issues;
  LoadOptions lenient;
  lenient.strict = false;
  const auto merged = load_catalog(CatalogPaths::in_directory(dir / "catalog"), lenient, &issues);
  if (!issues.empty()) return fail("merged file: " + issues.front().describe());
  LoadOptions strict;
  strict.strict = true;
  load_catalog(CatalogPaths::in_directory(dir / "catalog"), strict);
  if (merged.interactions.size() != syn.catalog.interactions.size() + 4) return fail("merged row count is off");
  return pass("3 click + 1 view (rating 5) records; merged ratings reload strictly with 0 issues (" +
              std::to_string(merged.interactions.size()) + " rows)");
}

struct Criterion {
  int id;
  double budget_seconds;
  std::function<Outcome(const fs::path&)> run;
};

}  // namespace
}  // namespace absim::acceptance

int main(int argc, char** argv) {
  using namespace absim::acceptance;
  CLI::App app{"absim acceptance criteria"};
  std::vector<int> known_failing, only;
  std::string work_dir = "acceptance-work";
  app.add_option("--known-failing", known_failing, "criteria expected to fail")->delimiter(',');
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  app.add_option("--work-dir", work_dir, "scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, 1, fatigue_arithmetic}, {2, 1, fatigue_properties}, {3, 5, metric_oracle},    {4, 120, model_ranking},
      {5, 180, data_scale},       {6, 180, feature_ablation}, {7, 60, taste_alignment}, {8, 60, activity_traits},
      {9, 10, sandbox_fuzz},      {10, 10, retrieval},        {11, 120, determinism},   {12, 60, real_data},
      {13, 5, augmentation}};

  const fs::path work(work_dir);
  fs::create_directories(work);
  std::set<int> failed;
  std::set<int> ran;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ran.insert(c.id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = fail(std::string("threw: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict == Verdict::kPass && dt > c.budget_seconds) {
      o = fail("over the " + fmt(c.budget_seconds, 0) + " s budget; " + o.detail);
    }
    if (o.verdict == Verdict::kFail) failed.insert(c.id);
    const char* word = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    std::cout << "criterion " << c.id << ": " << word << " - " << o.detail << " (" << fmt(dt, 2) << " s)" << std::endl;
  }

  std::set<int> declared;
  for (int k : known_failing) {
    if (ran.count(k)) declared.insert(k);
  }
  if (failed == declared) {
    if (!declared.empty()) std::cout << "failures match the declared known-failing set" << std::endl;
    return 0;
  }
  std::cout << "failure set differs from --known-failing:";
  for (int k : failed) std::cout << " failed " << k << (declared.count(k) ? "" : " (unexpected)");
  for (int k : declared) {
    if (!failed.count(k)) std::cout << " " << k << " declared failing but passed";
  }
  std::cout << std::endl;
  return 1;
}
