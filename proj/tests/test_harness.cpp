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

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "../acceptance/oracles.hpp"
#include "absim/harness.hpp"
#include "testing.hpp"

namespace absim {
namespace {

using testing::TempDir;
using testing::tiny_catalog;

Event ev(EventKind kind, std::size_t step, std::vector<MovieId> ids = {}, std::optional<int> rating = std::nullopt) {
  Event e;
  e.session_id = "s";
  e.step = step;
  e.kind = kind;
  e.movie_ids = std::move(ids);
  e.rating = rating;
  e.timestamp = 100 + static_cast<std::int64_t>(step);
  return e;
}

std::vector<Event> toy_log() {
  return {ev(EventKind::kImpression, 0, {1, 2, 3, 4, 5}),
          ev(EventKind::kClick, 1, {1}),
          ev(EventKind::kWatch, 2, {1}),
          ev(EventKind::kRate, 2, {1}, 4),
          ev(EventKind::kNavBack, 3),
          ev(EventKind::kImpression, 3, {1, 2, 3, 4, 5}),
          ev(EventKind::kClick, 4, {2}),
          ev(EventKind::kWatch, 5, {2}),
          ev(EventKind::kRate, 5, {2}, 5),
          ev(EventKind::kClick, 6, {3}),
          ev(EventKind::kExit, 7)};
}

TEST(Metrics, ToyLogCounts) {
  const auto m = compute_metrics(toy_log());
  EXPECT_EQ(m.impression_events, 2);
  EXPECT_EQ(m.impressions, 10);
  EXPECT_EQ(m.clicks, 3);
  EXPECT_EQ(m.watches, 2);
  EXPECT_DOUBLE_EQ(*m.ctr, 0.3);
  EXPECT_DOUBLE_EQ(*m.cvr, 0.2);
  EXPECT_DOUBLE_EQ(*m.ar, 4.5);
  EXPECT_NEAR(*compute_metrics(toy_log(), CvrDefinition::kWatchPerClick).cvr, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(*compute_metrics(toy_log(), CvrDefinition::kDetailViewPerImpression).cvr, 0.3);
}

TEST(Metrics, AbsentAndZeroConventions) {
  const auto none = compute_metrics({});
  EXPECT_FALSE(none.ctr);
  EXPECT_FALSE(none.cvr);
  EXPECT_FALSE(none.ar);

  const auto clicks_only = compute_metrics({ev(EventKind::kImpression, 0, {1, 2, 3, 4, 5}), ev(EventKind::kClick, 1, {2}),
                                            ev(EventKind::kExit, 2)});
  EXPECT_DOUBLE_EQ(*clicks_only.ctr, 0.2);
  EXPECT_DOUBLE_EQ(*clicks_only.cvr, 0.0);
  EXPECT_FALSE(clicks_only.ar);
  EXPECT_TRUE(clicks_only.to_json()["ar"].is_null());

  const auto idle = compute_metrics({ev(EventKind::kImpression, 0, {1, 2, 3, 4, 5}), ev(EventKind::kExit, 1)});
  EXPECT_DOUBLE_EQ(*idle.ctr, 0.0);
  EXPECT_DOUBLE_EQ(*idle.cvr, 0.0);
}

TEST(Metrics, MatchRecountOracleOnFuzzedLogs) {
  const auto cat = tiny_catalog(2, 40);
  const Sandbox sandbox(cat, SandboxConfig{});
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    RankedList ranked;
    ranked.user_id = 1;
    ranked.items.resize(20);
    std::iota(ranked.items.begin(), ranked.items.end(), 1 + static_cast<MovieId>(rng.below(20)));
    auto [state, problems] = oracle::random_walk(sandbox, ranked, "w" + std::to_string(trial), rng);
    ASSERT_TRUE(problems.empty()) << problems.front();
    const auto m = compute_metrics(state.events);
    const auto r = oracle::recount(state.events);
    EXPECT_EQ(m.impressions, r.impressed);
    EXPECT_EQ(m.clicks, r.clicks);
    EXPECT_EQ(m.watches, r.watches);
    EXPECT_EQ(m.ctr, r.ctr());
    EXPECT_EQ(m.cvr, r.cvr());
    EXPECT_EQ(m.ar, r.ar());
  }
}

TEST(Consistency, KendallTau) {
  EXPECT_DOUBLE_EQ(ranking_consistency({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(ranking_consistency({1, 2, 3}, {3, 2, 1}), -1.0);
  EXPECT_NEAR(ranking_consistency({1, 2, 3}, {1, 3, 2}), 1.0 / 3.0, 1e-12);
  EXPECT_THROW(ranking_consistency({1}, {1}), Error);
  EXPECT_THROW(ranking_consistency({1, 2}, {1, 2, 3}), Error);

  // Brute-force pair count on random vectors.
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = static_cast<double>(rng.below(4));
    for (auto& x : b) x = static_cast<double>(rng.below(4));
    double s = 0;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (i < j) s += ((a[i] < a[j]) - (a[i] > a[j])) * ((b[i] < b[j]) - (b[i] > b[j]));
      }
    }
    EXPECT_NEAR(ranking_consistency(a, b), s / 15.0, 1e-12);
  }
}

TEST(Consistency, KolmogorovSmirnov) {
  const auto same = ks_two_sample({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(same.statistic, 0.0);
  EXPECT_DOUBLE_EQ(same.p_value, 1.0);

  const auto apart = ks_two_sample({1, 2, 3, 4, 5}, {6, 7, 8, 9, 10});
  EXPECT_DOUBLE_EQ(apart.statistic, 1.0);
  EXPECT_LT(apart.p_value, 0.01);

  // D by brute force over the pooled support.
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(40), b(55);
    for (auto& x : a) x = static_cast<double>(rng.below(8));
    for (auto& x : b) x = static_cast<double>(rng.below(9));
    double d = 0.0;
    for (int t = -1; t <= 9; ++t) {
      const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double x) { return x <= t; })) / 40.0;
      const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double x) { return x <= t; })) / 55.0;
      d = std::max(d, std::fabs(fa - fb));
    }
    const auto r = ks_two_sample(a, b);
    EXPECT_NEAR(r.statistic, d, 1e-12);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ShippedConfigLoadsAndRoundTrips) {
  const auto c = ExperimentConfig::load(std::filesystem::path(ABSIM_SOURCE_DIR) / "configs" / "abtest.json");
  ASSERT_EQ(c.arms.size(), 5u);
  EXPECT_EQ(c.arms[3].train_fraction, 0.75);
  EXPECT_EQ(c.fatigue.budget, 30.0);
  const auto again = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(Config, RejectsBadInput) {
  auto expect_config_error = [](const json& j) {
    try {
      ExperimentConfig::from_json(j);
      ADD_FAILURE() << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig) << e.what();
    }
  };
  expect_config_error(json::object());
  expect_config_error({{"arms", json::array()}});
  expect_config_error({{"arms", {{{"name", "a"}, {"kind", "pop"}}, {{"name", "a"}, {"kind", "pop"}}}}});
  expect_config_error({{"arms", {{{"name", "a"}, {"kind", "popularity"}}}}, {"sessions_per_user", 0}});
  expect_config_error({{"arms", {{{"name", "a"}, {"kind", "popularity"}}}}, {"fatigue", {{"preset", "x"}}}});

  TempDir dir;
  try {
    ExperimentConfig::load(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
  }
}

// ---------------------------------------------------------------------------
// Experiments on a small synthetic fixture

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 5;
  c.arms = {ArmSpec{"random", RecommenderKind::kRandom, {}, 1.0, ""},
            ArmSpec{"pop", RecommenderKind::kPopularity, {}, 1.0, ""}};
  ArmSpec fm{"fm", RecommenderKind::kFm, {}, 1.0, ""};
  fm.fm.epochs = 4;
  c.arms.push_back(fm);
  c.data.seed = 5;
  c.data.synthetic.users = 30;
  c.data.synthetic.movies = 80;
  c.data.synthetic.interactions = 900;
  return c;
}

TEST(Experiment, DeterministicAndRecomputableFromTraces) {
  const auto config = small_config();
  const auto data = load_experiment_data(config.data);
  TempDir d1;
  TempDir d2("_b");
  RunOptions o1, o2;
  o1.out_dir = d1.path();
  o2.out_dir = d2.path();
  const auto a = run_experiment(config, data, o1);
  const auto b = run_experiment(config, data, o2);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  ASSERT_EQ(a.arms.size(), 3u);
  ASSERT_TRUE(a.kendall_ctr_recall);

  for (const auto& arm : a.arms) {
    ASSERT_FALSE(arm.error) << *arm.error;
    EXPECT_EQ(testing::read_text(d1 / arm.trace_path), testing::read_text(d2 / arm.trace_path));
    const auto traces = read_trace(d1 / arm.trace_path);
    EXPECT_EQ(traces.size(), 30u);
    std::vector<Event> merged;
    for (const auto& t : traces) {
      EXPECT_TRUE(oracle::session_violations(t.events).empty()) << arm.name;
      merged.insert(merged.end(), t.events.begin(), t.events.end());
    }
    const auto r = oracle::recount(merged);
    EXPECT_EQ(arm.metrics.ctr, r.ctr());
    EXPECT_EQ(arm.metrics.cvr, r.cvr());
    EXPECT_EQ(arm.metrics.ar, r.ar());
  }
}

TEST(Experiment, FailingArmIsReportedAndOthersProceed) {
  auto config = small_config();
  config.arms = {ArmSpec{"pop", RecommenderKind::kPopularity, {}, 1.0, ""},
                 ArmSpec{"ext", RecommenderKind::kExternal, {}, 1.0, "/nonexistent/lists.jsonl"}};
  const auto data = load_experiment_data(config.data);
  const auto report = run_experiment(config, data, {});
  EXPECT_FALSE(report.arm("pop").error);
  ASSERT_TRUE(report.arm("ext").error);
  EXPECT_NE(report.arm("ext").error->find("fit failed"), std::string::npos);
  EXPECT_FALSE(report.kendall_ctr_recall);
}

TEST(Experiment, UnpairedCohortsArePartitioned) {
  auto config = small_config();
  config.cohort.paired = false;
  const auto data = load_experiment_data(config.data);
  const auto report = run_experiment(config, data, {});
  std::set<UserId> seen;
  std::size_t total = 0;
  for (const auto& arm : report.arms) {
    for (const auto& s : arm.sessions) {
      seen.insert(s.user_id);
      ++total;
    }
  }
  EXPECT_EQ(total, 30u);
  EXPECT_EQ(seen.size(), 30u);
}

TEST(Experiment, CohortSelection) {
  const auto config = small_config();
  const auto data = load_experiment_data(config.data);
  CohortSpec all;
  EXPECT_EQ(select_cohort(data.catalog, data.split, all).size(), 30u);
  CohortSpec sample;
  sample.sample = 7;
  sample.seed = 3;
  const auto s1 = select_cohort(data.catalog, data.split, sample);
  EXPECT_EQ(s1.size(), 7u);
  EXPECT_EQ(s1, select_cohort(data.catalog, data.split, sample));
  EXPECT_TRUE(std::is_sorted(s1.begin(), s1.end()));
  CohortSpec explicit_users;
  explicit_users.users = {5, 2, 5};
  EXPECT_EQ(select_cohort(data.catalog, data.split, explicit_users), (std::vector<UserId>{2, 5}));
  explicit_users.users = {9999};
  EXPECT_THROW(select_cohort(data.catalog, data.split, explicit_users), Error);
}

TEST(Experiment, OfflineEvalOracleRecommender) {
  const auto config = small_config();
  const auto data = load_experiment_data(config.data);
  // Lists holding exactly each user's test items give recall 1.
  TempDir dir;
  std::map<UserId, std::vector<MovieId>> lists;
  for (const auto& it : data.split.test) lists[it.user_id].push_back(it.movie_id);
  {
    std::ofstream out(dir / "lists.jsonl");
    for (const auto& [u, items] : lists) {
      auto padded = items;
      for (MovieId m = 1; padded.size() < 5; ++m) {
        if (std::find(padded.begin(), padded.end(), m) == padded.end()) padded.push_back(m);
      }
      out << json{{"user_id", u}, {"items", padded}}.dump() << '\n';
    }
  }
  auto rec = ExternalRecommender::load(dir / "lists.jsonl", 5);
  rec.fit(data.catalog, data.split.train, 0);
  const auto m = offline_eval(rec, data.split, 20);
  EXPECT_EQ(m.users, lists.size());
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
}

// ---------------------------------------------------------------------------
// Studies

TEST(Studies, TasteListsAreReproducibleAndComposed) {
  const auto config = small_config();
  const auto data = load_experiment_data(config.data);
  const std::vector<MovieId> positives = {1, 2, 3, 4};
  // The history covers the whole record, held-out positives included.
  const std::set<MovieId> seen = {1, 2, 3, 4, 10, 11};
  const auto a = taste_list(data.catalog, positives, seen, TasteRatio{2, 18}, 7, 3);
  const auto b = taste_list(data.catalog, positives, seen, TasteRatio{2, 18}, 7, 3);
  EXPECT_EQ(a.items, b.items);
  ASSERT_EQ(a.items.size(), 20u);
  EXPECT_EQ(std::set<MovieId>(a.items.begin(), a.items.end()).size(), 20u);
  EXPECT_EQ(std::count_if(a.items.begin(), a.items.end(), [](MovieId m) { return m <= 4; }), 2);
  for (auto m : a.items) EXPECT_TRUE(m <= 4 || !seen.count(m)) << m;
}

TEST(Studies, ActivityHistogramsConserveSessions) {
  const auto config = small_config();
  const auto data = load_experiment_data(config.data);
  ActivityOptions o;
  o.seed = 2;
  o.recommender = RecommenderKind::kPopularity;
  const auto r = activity_trait_study(data.catalog, data.split, o);
  std::size_t total = 0;
  for (const auto& g : r.groups) {
    const auto sum = std::accumulate(g.histogram.begin(), g.histogram.end(), std::int64_t{0});
    EXPECT_EQ(static_cast<std::size_t>(sum), g.clicks.size());
    total += g.clicks.size();
  }
  EXPECT_EQ(total, 30u);
  for (const auto& k : r.ks) {
    EXPECT_GE(k.p_value, 0.0);
    EXPECT_LE(k.p_value, 1.0);
  }
  ActivityOptions tiny = o;
  tiny.cohort = {1, 2};
  EXPECT_THROW(activity_trait_study(data.catalog, data.split, tiny), Error);
}

// ---------------------------------------------------------------------------
// Augmentation export

TraceSession toy_trace() {
  TraceSession t;
  t.arm = "fm";
  t.user_id = 1;
  t.events = {ev(EventKind::kImpression, 0, {1, 2, 3, 4, 5}),
              ev(EventKind::kClick, 1, {1}),
              ev(EventKind::kNavBack, 2),
              ev(EventKind::kImpression, 2, {1, 2, 3, 4, 5}),
              ev(EventKind::kClick, 3, {2}),
              ev(EventKind::kWatch, 4, {2}),
              ev(EventKind::kRate, 4, {2}, 5),
              ev(EventKind::kNavBack, 5),
              ev(EventKind::kImpression, 5, {1, 2, 3, 4, 5}),
              ev(EventKind::kClick, 6, {3}),
              ev(EventKind::kExit, 7)};
  return t;
}

TEST(Export, ToyTraceCounts) {
  const auto records = augmented_records({toy_trace()});
  ASSERT_EQ(records.size(), 4u);
  std::ostringstream out;
  const auto counts = export_augmented(records, ExportFormat::kLabeled, out);
  EXPECT_EQ(counts.clicks, 3);
  EXPECT_EQ(counts.views, 1);
  const auto view = std::find_if(records.begin(), records.end(), [](const auto& r) { return r.signal == Signal::kView; });
  ASSERT_NE(view, records.end());
  EXPECT_EQ(view->movie_id, 2);
  EXPECT_EQ(view->rating, 5);
  // Every record names a distinct source event.
  std::set<std::string> sources;
  for (const auto& r : records) sources.insert(r.source);
  EXPECT_EQ(sources.size(), records.size());

  std::istringstream lines(out.str());
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    const auto j = json::parse(line);
    EXPECT_TRUE(j["signal"] == "click" || j["signal"] == "view");
  }
  EXPECT_EQ(n, 4u);
}

TEST(Export, EmptyTracesGiveEmptyOutput) {
  std::ostringstream out;
  const auto counts = export_augmented(augmented_records({}), ExportFormat::kInteractions, out);
  EXPECT_EQ(counts.clicks, 0);
  EXPECT_EQ(counts.views, 0);
  EXPECT_TRUE(out.str().empty());
}

TEST(Export, MergedInteractionsReloadStrictly) {
  TempDir dir;
  const auto cat = tiny_catalog(3, 10);
  write_catalog(cat, dir.path());
  std::ostringstream out;
  export_augmented(augmented_records({toy_trace()}), ExportFormat::kInteractions, out);
  EXPECT_EQ(out.str(), "1::1::3::101\n1::2::3::103\n1::2::5::104\n1::3::3::106\n");
  {
    std::ofstream ratings(dir / "ratings.dat", std::ios::app);
    ratings << out.str();
  }
  const auto merged = load_catalog(dir.path());
  EXPECT_EQ(merged.interactions.size(), cat.interactions.size() + 4);
}

TEST(Export, RepeatedKeysAcrossArmsAreWrittenOnce) {
  auto other = toy_trace();
  other.arm = "pop";
  const auto records = augmented_records({toy_trace(), other});
  ASSERT_EQ(records.size(), 8u);
  std::ostringstream rows;
  const auto counts = export_augmented(records, ExportFormat::kInteractions, rows);
  EXPECT_EQ(counts.clicks, 6);
  EXPECT_EQ(counts.views, 2);
  EXPECT_EQ(counts.collisions, 4);
  const auto text = rows.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  std::ostringstream labeled;
  EXPECT_EQ(export_augmented(records, ExportFormat::kLabeled, labeled).collisions, 0);
}

TEST(Export, TraceRoundTripThroughFiles) {
  TempDir dir;
  SessionRecord rec;
  rec.user_id = 1;
  rec.events = toy_trace().events;
  rec.ranked.items = {1, 2, 3, 4, 5};
  {
    std::ofstream out(dir / "fm.jsonl");
    write_trace(out, "fm", {rec});
  }
  const auto files = trace_files(dir.path());
  ASSERT_EQ(files.size(), 1u);
  const auto back = read_trace(files[0]);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].arm, "fm");
  EXPECT_EQ(back[0].events, rec.events);
  EXPECT_EQ(back[0].ranked, rec.ranked.items);
  EXPECT_THROW(trace_files(dir / "nope"), Error);
  testing::write_text(dir / "bad.jsonl", "{not json\n");
  try {
    read_trace(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:1"), std::string::npos);
  }
}

}  // namespace
}  // namespace absim
