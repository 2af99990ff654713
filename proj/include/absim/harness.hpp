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

// Experiment orchestration: simulated A/B tests over recommender arms,
// CTR/CVR/AR metrics, offline reference metrics and the alignment studies.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "absim/agent.hpp"
#include "absim/catalog.hpp"
#include "absim/common.hpp"
#include "absim/memory.hpp"
#include "absim/recsys.hpp"
#include "absim/sandbox.hpp"

namespace absim {

// ---------------------------------------------------------------------------
// Metrics

enum class CvrDefinition { kWatchPerImpression, kWatchPerClick, kDetailViewPerImpression };

inline const char* to_string(CvrDefinition d) {
  switch (d) {
    case CvrDefinition::kWatchPerImpression: return "watch_per_impression";
    case CvrDefinition::kWatchPerClick: return "watch_per_click";
    case CvrDefinition::kDetailViewPerImpression: return "detail_view_per_impression";
  }
  return "?";
}

inline CvrDefinition parse_cvr_definition(std::string_view s) {
  for (auto d : {CvrDefinition::kWatchPerImpression, CvrDefinition::kWatchPerClick,
                 CvrDefinition::kDetailViewPerImpression}) {
    if (s == to_string(d)) return d;
  }
  throw Error(ErrorKind::kConfig, "unknown cvr definition '" + std::string(s) + "'");
}

struct Metrics {
  std::int64_t impression_events = 0;
  std::int64_t impressions = 0;  // impressed cards
  std::int64_t clicks = 0;
  std::int64_t watches = 0;
  std::int64_t ratings_count = 0;
  std::int64_t rating_sum = 0;
  std::optional<double> ctr;
  std::optional<double> cvr;
  std::optional<double> ar;

  ordered_json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json j;
    j["ctr"] = opt(ctr);
    j["cvr"] = opt(cvr);
    j["ar"] = opt(ar);
    j["impressions"] = impressions;
    j["impression_events"] = impression_events;
    j["clicks"] = clicks;
    j["watches"] = watches;
    j["ratings_count"] = ratings_count;
    return j;
  }
};

/// CTR = clicks / impressed cards. AR is the mean over rate events and is
/// absent when there are none.
inline Metrics compute_metrics(const std::vector<Event>& events,
                               CvrDefinition cvr = CvrDefinition::kWatchPerImpression) {
  Metrics m;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::kImpression:
        ++m.impression_events;
        m.impressions += static_cast<std::int64_t>(e.movie_ids.size());
        break;
      case EventKind::kClick: ++m.clicks; break;
      case EventKind::kWatch: ++m.watches; break;
      case EventKind::kRate:
        if (e.rating) {
          ++m.ratings_count;
          m.rating_sum += *e.rating;
        }
        break;
      default: break;
    }
  }
  const auto ratio = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.ctr = ratio(m.clicks, m.impressions);
  switch (cvr) {
    case CvrDefinition::kWatchPerImpression: m.cvr = ratio(m.watches, m.impressions); break;
    case CvrDefinition::kWatchPerClick: m.cvr = ratio(m.watches, m.clicks); break;
    case CvrDefinition::kDetailViewPerImpression: m.cvr = ratio(m.clicks, m.impressions); break;
  }
  m.ar = ratio(m.rating_sum, m.ratings_count);
  return m;
}

struct OfflineMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;
};

/// Mean Recall@k / NDCG@k over users with test interactions; relevant items
/// are each user's test items.
inline OfflineMetrics offline_eval(const Recommender& rec, const DatasetSplit& split, std::size_t k = 20) {
  std::map<UserId, std::set<MovieId>> relevant;
  for (const auto& it : split.test) relevant[it.user_id].insert(it.movie_id);
  OfflineMetrics out;
  for (const auto& [user, items] : relevant) {
    const auto ranked = rec.recommend(user, k);
    out.recall += recall_at_k(ranked, items, k);
    out.ndcg += ndcg_at_k(ranked, items, k);
    ++out.users;
  }
  if (out.users) {
    out.recall /= static_cast<double>(out.users);
    out.ndcg /= static_cast<double>(out.users);
  }
  return out;
}

/// Kendall tau-a between two per-arm metric vectors.
inline double ranking_consistency(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kInvalidArgument, "metric vectors differ in length");
  if (a.size() < 2) throw Error(ErrorKind::kInvalidArgument, "ranking consistency needs at least 2 arms");
  auto sign = [](double x) { return (x > 0) - (x < 0); };
  long s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) s += sign(a[i] - a[j]) * sign(b[i] - b[j]);
  }
  const double pairs = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return static_cast<double>(s) / pairs;
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::kInvalidArgument, "KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)};
}

// ---------------------------------------------------------------------------
// Configuration

struct ArmSpec {
  std::string name;
  RecommenderKind kind = RecommenderKind::kFm;
  FmParams fm;
  double train_fraction = 1.0;  // chronological per-user prefix of train
  std::string external_path;    // kExternal only

  json to_json() const {
    json j = {{"name", name}, {"kind", to_string(kind)}, {"train_fraction", train_fraction}};
    if (kind == RecommenderKind::kFm) j["fm"] = fm.to_json();
    if (kind == RecommenderKind::kExternal) j["path"] = external_path;
    return j;
  }
  static ArmSpec from_json(const json& j) {
    ArmSpec a;
    a.name = j.at("name").get<std::string>();
    a.kind = parse_recommender_kind(j.at("kind").get<std::string>());
    if (j.contains("fm")) a.fm = FmParams::from_json(j["fm"]);
    if (j.contains("schema")) a.fm.schema = FeatureSchema::parse(j["schema"].get<std::string>());
    a.train_fraction = j.value("train_fraction", 1.0);
    a.external_path = j.value("path", std::string());
    if (!(a.train_fraction > 0.0 && a.train_fraction <= 1.0)) {
      throw Error(ErrorKind::kConfig, "arm " + a.name + ": train_fraction must be in (0,1]");
    }
    if (a.kind == RecommenderKind::kExternal && a.external_path.empty()) {
      throw Error(ErrorKind::kConfig, "arm " + a.name + ": external arms need a path");
    }
    return a;
  }
};

struct CohortSpec {
  std::optional<std::size_t> sample;  // all users when absent
  std::uint64_t seed = 0;
  bool paired = true;  // false: users are split across arms instead
  std::vector<UserId> users;  // explicit cohort; overrides `sample`

  json to_json() const {
    json j = {{"sample", sample ? json(*sample) : json("all")}, {"seed", seed}, {"paired", paired}};
    if (!users.empty()) j["users"] = users;
    return j;
  }
  static CohortSpec from_json(const json& j) {
    CohortSpec c;
    if (j.contains("sample") && j["sample"].is_number_unsigned()) c.sample = j["sample"].get<std::size_t>();
    if (j.contains("users")) c.users = j["users"].get<std::vector<UserId>>();
    c.seed = j.value("seed", c.seed);
    c.paired = j.value("paired", c.paired);
    return c;
  }
};

struct DataSpec {
  std::string source = "synthetic";  // or "directory"
  std::string path;
  SyntheticSpec synthetic;
  std::uint64_t seed = 0;
  SplitRatios split;

  json to_json() const {
    const auto& s = synthetic;
    return {{"source", source},
            {"path", path},
            {"seed", seed},
            {"split", {split.train, split.valid, split.test}},
            {"synthetic",
             {{"users", s.users}, {"movies", s.movies}, {"genres", s.genres}, {"interactions", s.interactions},
              {"concentration", s.concentration}, {"demographic_weight", s.demographic_weight},
              {"max_genres_per_movie", s.max_genres_per_movie}, {"style_dims", s.style_dims},
              {"style_strength", s.style_strength}, {"activity_sigma", s.activity_sigma},
              {"min_interactions_per_user", s.min_interactions_per_user}, {"start_time", s.start_time}}}};
  }
  static DataSpec from_json(const json& j) {
    DataSpec d;
    d.source = j.value("source", d.source);
    d.path = j.value("path", d.path);
    d.seed = j.value("seed", d.seed);
    if (j.contains("split")) {
      const auto& v = j["split"];
      d.split = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
    }
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      auto& o = d.synthetic;
      o.users = s.value("users", o.users);
      o.movies = s.value("movies", o.movies);
      o.genres = s.value("genres", o.genres);
      o.interactions = s.value("interactions", o.interactions);
      o.concentration = s.value("concentration", o.concentration);
      o.demographic_weight = s.value("demographic_weight", o.demographic_weight);
      o.max_genres_per_movie = s.value("max_genres_per_movie", o.max_genres_per_movie);
      o.style_dims = s.value("style_dims", o.style_dims);
      o.style_strength = s.value("style_strength", o.style_strength);
      o.activity_sigma = s.value("activity_sigma", o.activity_sigma);
      o.min_interactions_per_user = s.value("min_interactions_per_user", o.min_interactions_per_user);
      o.start_time = s.value("start_time", o.start_time);
    }
    if (d.source != "synthetic" && d.source != "directory") {
      throw Error(ErrorKind::kConfig, "data.source must be synthetic or directory");
    }
    if (d.source == "directory" && d.path.empty()) throw Error(ErrorKind::kConfig, "data.path required");
    return d;
  }
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::kRule;
  RuleConfig rule;
  int retries = 2;

  json to_json() const { return {{"kind", to_string(kind)}, {"rule", rule.to_json()}, {"retries", retries}}; }
  static PolicySpec from_json(const json& j) {
    PolicySpec p;
    const auto kind = j.value("kind", std::string("rule"));
    if (kind == "rule") {
      p.kind = PolicyKind::kRule;
    } else if (kind == "llm") {
      p.kind = PolicyKind::kLlm;
    } else {
      throw Error(ErrorKind::kConfig, "policy.kind must be rule or llm");
    }
    if (j.contains("rule")) p.rule = RuleConfig::from_json(j["rule"]);
    p.retries = j.value("retries", p.retries);
    return p;
  }
};

struct ExperimentConfig {
  std::vector<ArmSpec> arms;
  CohortSpec cohort;
  std::size_t sessions_per_user = 1;
  PolicySpec policy;
  std::string fatigue_preset = "mini-column";
  FatigueConfig fatigue;
  SandboxConfig sandbox;
  std::uint64_t seed = 0;
  DataSpec data;
  CvrDefinition cvr = CvrDefinition::kWatchPerImpression;
  std::size_t embedding_dim = 64;
  std::size_t memory_top_k = 5;
  std::size_t workers = 1;
  std::size_t offline_k = 20;

  void validate() const {
    if (arms.empty()) throw Error(ErrorKind::kConfig, "experiment needs at least one arm");
    std::set<std::string> names;
    for (const auto& a : arms) {
      if (a.name.empty()) throw Error(ErrorKind::kConfig, "arm without a name");
      if (!names.insert(a.name).second) throw Error(ErrorKind::kConfig, "duplicate arm name '" + a.name + "'");
    }
    if (sessions_per_user == 0) throw Error(ErrorKind::kConfig, "sessions_per_user must be >= 1");
    fatigue.validate();
  }

  /// The resolved configuration with every default materialized.
  json to_json() const {
    json arms_j = json::array();
    for (const auto& a : arms) arms_j.push_back(a.to_json());
    json f = fatigue.to_json();
    f["preset"] = fatigue_preset;
    return {{"arms", arms_j},
            {"cohort", cohort.to_json()},
            {"sessions_per_user", sessions_per_user},
            {"policy", policy.to_json()},
            {"fatigue", f},
            {"sandbox", sandbox.to_json()},
            {"seed", seed},
            {"data", data.to_json()},
            {"metrics", {{"cvr_definition", to_string(cvr)}, {"offline_k", offline_k}}},
            {"memory", {{"embedding_dim", embedding_dim}, {"top_k", memory_top_k}}}};
  }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    try {
      for (const auto& a : j.at("arms")) c.arms.push_back(ArmSpec::from_json(a));
      if (j.contains("cohort")) c.cohort = CohortSpec::from_json(j["cohort"]);
      c.sessions_per_user = j.value("sessions_per_user", c.sessions_per_user);
      if (j.contains("policy")) c.policy = PolicySpec::from_json(j["policy"]);
      if (j.contains("fatigue")) {
        c.fatigue = FatigueConfig::from_json(j["fatigue"]);
        c.fatigue_preset = j["fatigue"].value("preset", c.fatigue_preset);
      }
      if (j.contains("sandbox")) c.sandbox = SandboxConfig::from_json(j["sandbox"]);
      if (j.contains("vision_enabled")) c.sandbox.vision_enabled = j["vision_enabled"].get<bool>();
      if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("data")) c.data = DataSpec::from_json(j["data"]);
      if (j.contains("metrics")) {
        c.cvr = parse_cvr_definition(j["metrics"].value("cvr_definition", std::string(to_string(c.cvr))));
        c.offline_k = j["metrics"].value("offline_k", c.offline_k);
      }
      if (j.contains("memory")) {
        c.embedding_dim = j["memory"].value("embedding_dim", c.embedding_dim);
        c.memory_top_k = j["memory"].value("top_k", c.memory_top_k);
      }
      c.workers = j.value("workers", c.workers);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kMissingInput, "cannot read config " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

struct ExperimentData {
  Catalog catalog;
  DatasetSplit split;
};

inline ExperimentData load_experiment_data(const DataSpec& spec) {
  ExperimentData d;
  if (spec.source == "synthetic") {
    d.catalog = generate_synthetic(spec.synthetic, spec.seed).catalog;
  } else {
    d.catalog = load_catalog(std::filesystem::path(spec.path));
  }
  d.split = chronological_split(d.catalog, spec.split);
  return d;
}

// ---------------------------------------------------------------------------
// Simulation plumbing

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results are
/// written by index, so the outcome does not depend on scheduling. The
/// first exception (by index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::string session_id_for(const std::string& arm, UserId user, std::size_t index) {
  return arm + "-u" + std::to_string(user) + "-s" + std::to_string(index);
}

inline std::uint64_t session_seed(std::uint64_t master, UserId user, std::size_t index) {
  return derive_seed(master, 0x73657373ull, user, index);
}

/// Per-session timestamp origin, spaced so sessions never share a timestamp.
inline std::int64_t session_start_time(const SandboxConfig& c, std::size_t index) {
  return c.start_time + static_cast<std::int64_t>(index * (c.step_cap + 1));
}

/// Long-term memory pre-filled with the user's training history.
inline LongTermMemory seed_memory(UserId user, const History& history, const MemoryProviders& providers,
                                  bool vision) {
  LongTermMemory mem(user);
  if (!providers.text) return mem;
  for (const auto& [it, m] : history) {
    MemoryRecord r;
    r.user_id = user;
    r.movie_id = m.movie_id;
    r.session_id = "history";
    r.timestamp = it.timestamp;
    r.payload = "rated " + m.title + " " + std::to_string(it.rating) + ".0 (" + join(m.genres, "|") + ")";
    r.embedding = providers.text->embed(r.payload);
    mem.add(r);
    if (vision && providers.image && m.poster_ref && !m.poster_ref->empty()) {
      r.modality = Modality::kImage;
      r.embedding = providers.image->embed(*m.poster_ref);
      r.payload = "poster of " + m.title + ": " + *m.poster_ref;
      mem.add(std::move(r));
    }
  }
  return mem;
}

/// Top-k list that also omits everything the user interacted with in the
/// full training history, so partially trained arms do not resurface
/// already-watched movies.
inline RankedList recommend_unseen(const Recommender& rec, UserId user, std::size_t k,
                                   const std::set<MovieId>& exclude) {
  auto ranked = rec.recommend(user, k + exclude.size());
  RankedList out;
  out.user_id = user;
  for (std::size_t i = 0; i < ranked.items.size() && out.items.size() < k; ++i) {
    if (exclude.count(ranked.items[i])) continue;
    out.items.push_back(ranked.items[i]);
    if (i < ranked.scores.size()) out.scores.push_back(ranked.scores[i]);
  }
  out.short_list = out.items.size() < k;
  return out;
}

struct SessionRecord {
  UserId user_id = 0;
  std::size_t session_index = 0;
  std::uint64_t seed = 0;
  RankedList ranked;
  std::vector<Event> events;
  std::optional<TerminationReason> termination;
  double fatigue = 0.0;
  std::int64_t clicks = 0;

  ordered_json header(const std::string& arm) const {
    ordered_json j;
    j["record"] = "session";
    j["arm"] = arm;
    j["session_id"] = events.empty() ? std::string() : events.front().session_id;
    j["user_id"] = user_id;
    j["session_index"] = session_index;
    j["seed"] = seed;
    j["ranked"] = ranked.items;
    j["termination"] = termination ? to_string(*termination) : "none";
    j["fatigue"] = fatigue;
    return j;
  }
};

inline void write_trace(std::ostream& out, const std::string& arm, const std::vector<SessionRecord>& sessions) {
  for (const auto& s : sessions) {
    out << s.header(arm).dump() << '\n';
    write_events(out, s.events);
  }
}

struct TraceSession {
  std::string arm;
  UserId user_id = 0;
  std::size_t session_index = 0;
  std::vector<MovieId> ranked;
  std::vector<Event> events;
};

/// Reads a combined trace: session header lines followed by their events.
inline std::vector<TraceSession> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot read trace " + path.string());
  std::vector<TraceSession> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.contains("record")) {
        TraceSession s;
        s.arm = j.value("arm", std::string());
        s.user_id = j.at("user_id").get<UserId>();
        s.session_index = j.value("session_index", std::size_t{0});
        s.ranked = j.value("ranked", std::vector<MovieId>{});
        out.push_back(std::move(s));
      } else {
        if (out.empty()) out.emplace_back();  // bare event log without headers
        out.back().events.push_back(Event::from_json(j));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// All trace files (*.jsonl) below `path`, or `path` itself, in name order.
inline std::vector<std::filesystem::path> trace_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw Error(ErrorKind::kMissingInput, "no traces at " + path.string());
  if (fs::is_regular_file(path)) return {path};
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------------------
// Experiments

struct ArmReport {
  std::string name;
  std::string kind;
  std::optional<std::string> error;
  Metrics metrics;
  std::optional<OfflineMetrics> offline;
  std::vector<std::pair<UserId, std::int64_t>> user_clicks;
  std::string trace_path;
  std::vector<SessionRecord> sessions;  // not serialized

  ordered_json to_json() const {
    ordered_json j;
    j["name"] = name;
    j["kind"] = kind;
    if (error) {
      j["error"] = *error;
      return j;
    }
    j["metrics"] = metrics.to_json();
    if (offline) {
      j["recall_at_k"] = offline->recall;
      j["ndcg_at_k"] = offline->ndcg;
      j["offline_users"] = offline->users;
    }
    ordered_json clicks = ordered_json::array();
    for (const auto& [u, c] : user_clicks) clicks.push_back({u, c});
    j["user_clicks"] = clicks;
    j["trace_path"] = trace_path;
    return j;
  }
};

struct SimulationReport {
  json config;
  std::vector<ArmReport> arms;
  std::optional<double> kendall_ctr_recall;
  std::vector<std::string> warnings;

  const ArmReport& arm(const std::string& name) const {
    for (const auto& a : arms) {
      if (a.name == name) return a;
    }
    throw Error(ErrorKind::kInvalidArgument, "no arm named " + name);
  }

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "absim.report";
    j["version"] = 1;
    ordered_json arms_j = ordered_json::array();
    for (const auto& a : arms) arms_j.push_back(a.to_json());
    j["arms"] = arms_j;
    j["kendall_tau_ctr_vs_recall"] = kendall_ctr_recall ? ordered_json(*kendall_ctr_recall) : ordered_json(nullptr);
    j["warnings"] = warnings;
    j["config"] = ordered_json::parse(config.dump());
    return j;
  }

  /// One row per arm: arm, CTR, CVR, AR, Recall@20, NDCG@20.
  std::string to_csv() const {
    std::ostringstream out;
    out << "arm,CTR,CVR,AR,Recall@20,NDCG@20\n";
    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string();
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *v);
      return std::string(buf);
    };
    for (const auto& a : arms) {
      out << a.name << ',' << cell(a.metrics.ctr) << ',' << cell(a.metrics.cvr) << ',' << cell(a.metrics.ar) << ','
          << cell(a.offline ? std::optional(a.offline->recall) : std::nullopt) << ','
          << cell(a.offline ? std::optional(a.offline->ndcg) : std::nullopt) << '\n';
    }
    return out.str();
  }
};

/// Aligned text table of a stored report (the JSON written by run_experiment).
inline std::string report_table(const json& report) {
  std::vector<std::array<std::string, 6>> rows = {{"arm", "CTR", "CVR", "AR", "Recall@20", "NDCG@20"}};
  auto num = [](const json& v) {
    if (v.is_null()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
    return std::string(buf);
  };
  auto field = [&](const json& obj, const char* key) { return obj.contains(key) ? num(obj[key]) : std::string("-"); };
  for (const auto& a : report.at("arms")) {
    const auto name = a.at("name").get<std::string>();
    if (a.contains("error")) {
      rows.push_back({name, "error", "-", "-", "-", "-"});
      continue;
    }
    const auto& m = a.at("metrics");
    rows.push_back({name, field(m, "ctr"), field(m, "cvr"), field(m, "ar"), field(a, "recall_at_k"), field(a, "ndcg_at_k")});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 6; ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 6; ++i) {
      if (i) out << "  ";
      out << (i ? std::string(width[i] - r[i].size(), ' ') + r[i] : r[i] + std::string(width[i] - r[i].size(), ' '));
    }
    out << '\n';
  }
  const auto& tau = report.contains("kendall_tau_ctr_vs_recall") ? report["kendall_tau_ctr_vs_recall"] : json();
  out << "Kendall tau (CTR vs Recall@20): " << num(tau) << '\n';
  return out.str();
}

/// Everything a session needs besides the ranked list; shared read-only.
struct SimulationEnv {
  const Catalog* catalog = nullptr;
  const Sandbox* sandbox = nullptr;
  const Policy* policy = nullptr;
  const FatigueConfig* fatigue = nullptr;
  MemoryProviders providers;
};

struct UserContext {
  Profile profile;
  History history;
  std::set<MovieId> seen;
};

/// Simulates `sessions` consecutive sessions for one user against one
/// recommender; memory carries over between them.
inline std::vector<SessionRecord> simulate_user(const SimulationEnv& env, const UserContext& user,
                                                const std::string& arm, const RankedList& ranked,
                                                std::size_t sessions, std::uint64_t master_seed) {
  std::vector<SessionRecord> out;
  const bool vision = env.sandbox->config().vision_enabled;
  auto memory = seed_memory(user.profile.user_id, user.history, env.providers, vision);
  for (std::size_t s = 0; s < sessions; ++s) {
    SessionSpec spec;
    spec.session_id = session_id_for(arm, user.profile.user_id, s);
    spec.arm_id = arm;
    spec.ranked = ranked;
    spec.seed = session_seed(master_seed, user.profile.user_id, s);
    spec.start_time = session_start_time(env.sandbox->config(), s);
    auto outcome = run_session(user.profile, *env.policy, *env.sandbox, memory, *env.fatigue, spec, env.providers);
    SessionRecord r;
    r.user_id = user.profile.user_id;
    r.session_index = s;
    r.seed = spec.seed;
    r.ranked = ranked;
    r.termination = outcome.state.terminated;
    r.fatigue = outcome.fatigue.accumulated;
    r.events = std::move(outcome.state.events);
    r.clicks = std::count_if(r.events.begin(), r.events.end(), [](const Event& e) { return e.kind == EventKind::kClick; });
    out.push_back(std::move(r));
  }
  return out;
}

inline std::map<UserId, UserContext> build_user_contexts(const Catalog& catalog, const std::vector<Interaction>& train,
                                                         const std::vector<UserId>& users,
                                                         const ProfileOptions& options) {
  std::map<UserId, UserContext> out;
  for (auto u : users) {
    UserContext c;
    c.history = history_of(catalog, train, u);
    for (const auto& [it, _] : c.history) c.seen.insert(it.movie_id);
    c.profile = build_profile(catalog.user(u), c.history, options);
    out.emplace(u, std::move(c));
  }
  return out;
}

inline std::vector<UserId> select_cohort(const Catalog& catalog, const DatasetSplit& split, const CohortSpec& spec) {
  std::set<UserId> with_train;
  for (const auto& it : split.train) with_train.insert(it.user_id);
  std::vector<UserId> users(with_train.begin(), with_train.end());
  if (!spec.users.empty()) {
    for (auto u : spec.users) {
      if (!with_train.count(u)) throw Error(ErrorKind::kInvalidArgument, "user " + std::to_string(u) + " has no training history");
    }
    users = spec.users;
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
  } else if (spec.sample && *spec.sample < users.size()) {
    Rng rng(derive_seed(spec.seed, 0x636f686full));
    rng.shuffle(users);
    users.resize(*spec.sample);
    std::sort(users.begin(), users.end());
  }
  for (auto u : users) catalog.user(u);
  if (users.empty()) throw Error(ErrorKind::kInvalidArgument, "cohort is empty");
  return users;
}

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // traces written under out_dir/traces
  TextGenerator* generator = nullptr;            // llm policy and profile summaries
  PromptTemplates prompts;
  const EmbeddingProvider* text_embedder = nullptr;   // default: deterministic
  const EmbeddingProvider* image_embedder = nullptr;  // default: deterministic
  std::function<void(const std::string&)> log;
};

inline SimulationReport run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                       const RunOptions& options = {}) {
  config.validate();
  SimulationReport report;
  report.config = config.to_json();
  report.warnings = data.split.warnings;
  auto log = [&](const std::string& m) {
    if (options.log) options.log(m);
  };

  const DeterministicEmbedder default_embedder(config.embedding_dim);
  MemoryProviders providers{options.text_embedder ? options.text_embedder : &default_embedder,
                            options.image_embedder ? options.image_embedder : &default_embedder,
                            config.memory_top_k};
  const Sandbox sandbox(data.catalog, config.sandbox);
  std::unique_ptr<Policy> policy;
  if (config.policy.kind == PolicyKind::kRule) {
    policy = std::make_unique<RulePolicy>(config.policy.rule, providers.image);
  } else {
    if (!options.generator) throw Error(ErrorKind::kConfig, "llm policy requires a text generator");
    policy = std::make_unique<LlmPolicy>(*options.generator, options.prompts, config.policy.retries);
  }
  SimulationEnv env{&data.catalog, &sandbox, policy.get(), &config.fatigue, providers};

  const auto cohort = select_cohort(data.catalog, data.split, config.cohort);
  ProfileOptions popts;
  popts.generator = options.generator;
  popts.image = providers.image;
  popts.prompts = options.prompts;
  popts.vision_enabled = config.sandbox.vision_enabled;
  const auto contexts = build_user_contexts(data.catalog, data.split.train, cohort, popts);
  log("cohort: " + std::to_string(cohort.size()) + " users");

  // Disjoint assignment: a seeded shuffle dealt round-robin over arms.
  std::vector<std::vector<UserId>> arm_users(config.arms.size(), cohort);
  if (!config.cohort.paired && config.arms.size() > 1) {
    auto shuffled = cohort;
    Rng rng(derive_seed(config.seed, 0x646973ull));
    rng.shuffle(shuffled);
    for (auto& v : arm_users) v.clear();
    for (std::size_t i = 0; i < shuffled.size(); ++i) arm_users[i % config.arms.size()].push_back(shuffled[i]);
    for (auto& v : arm_users) std::sort(v.begin(), v.end());
  }

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir / "traces");

  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    const auto& spec = config.arms[a];
    ArmReport ar;
    ar.name = spec.name;
    ar.kind = to_string(spec.kind);
    std::unique_ptr<Recommender> rec;
    try {
      if (spec.kind == RecommenderKind::kExternal) {
        rec = std::make_unique<ExternalRecommender>(ExternalRecommender::load(spec.external_path, config.sandbox.page_size));
      } else {
        rec = make_recommender(spec.kind, spec.fm);
      }
      const auto train =
          spec.train_fraction < 1.0 ? train_prefix(data.split.train, spec.train_fraction) : data.split.train;
      rec->fit(data.catalog, train, derive_seed(config.seed, 0x666974ull, a));
    } catch (const Error& e) {
      ar.error = std::string("fit failed: ") + e.what();
      log("arm " + spec.name + ": " + *ar.error);
      report.arms.push_back(std::move(ar));
      continue;
    }
    log("arm " + spec.name + ": fitted");

    const auto& users = arm_users[a];
    std::vector<std::vector<SessionRecord>> per_user(users.size());
    try {
      parallel_for(users.size(), config.workers, [&](std::size_t i) {
        const auto& ctx = contexts.at(users[i]);
        // External lists are shown as supplied.
        static const std::set<MovieId> kNone;
        const auto& exclude = spec.kind == RecommenderKind::kExternal ? kNone : ctx.seen;
        const auto ranked = recommend_unseen(*rec, users[i], config.sandbox.k, exclude);
        per_user[i] = simulate_user(env, ctx, spec.name, ranked, config.sessions_per_user, config.seed);
      });
    } catch (const Error& e) {
      ar.error = std::string("simulation failed: ") + e.what();
      report.arms.push_back(std::move(ar));
      continue;
    }

    std::vector<Event> merged;
    for (std::size_t i = 0; i < users.size(); ++i) {
      std::int64_t clicks = 0;
      for (auto& s : per_user[i]) {
        clicks += s.clicks;
        merged.insert(merged.end(), s.events.begin(), s.events.end());
        ar.sessions.push_back(std::move(s));
      }
      ar.user_clicks.emplace_back(users[i], clicks);
    }
    ar.metrics = compute_metrics(merged, config.cvr);
    ar.offline = offline_eval(*rec, data.split, config.offline_k);
    if (options.out_dir) {
      ar.trace_path = "traces/" + spec.name + ".jsonl";
      std::ofstream out(*options.out_dir / ar.trace_path);
      write_trace(out, spec.name, ar.sessions);
      if (!out) throw Error(ErrorKind::kMissingInput, "cannot write " + (*options.out_dir / ar.trace_path).string());
    }
    report.arms.push_back(std::move(ar));
  }

  std::vector<double> ctr, recall;
  for (const auto& a : report.arms) {
    if (a.error || !a.metrics.ctr || !a.offline) continue;
    ctr.push_back(*a.metrics.ctr);
    recall.push_back(a.offline->recall);
  }
  if (ctr.size() >= 2) report.kendall_ctr_recall = ranking_consistency(ctr, recall);
  return report;
}

// ---------------------------------------------------------------------------
// Taste alignment

struct TasteRatio {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::string label() const { return std::to_string(positives) + ":" + std::to_string(negatives); }
};

struct TasteOptions {
  /// 1:9, 1:4 and 1:1 over a 20-item list, plus the all-negative control.
  std::vector<TasteRatio> ratios = {{2, 18}, {4, 16}, {10, 10}, {0, 20}};
  int positive_min_rating = 4;
  std::vector<UserId> cohort;  // empty: every user
  std::uint64_t seed = 0;
  SandboxConfig sandbox;
  FatigueConfig fatigue;
  RuleConfig rule;
};

struct TasteResult {
  std::vector<std::pair<TasteRatio, Metrics>> per_ratio;
  std::size_t eligible_users = 0;
  std::size_t skipped_users = 0;

  const Metrics& at(std::size_t positives, std::size_t negatives) const {
    for (const auto& [r, m] : per_ratio) {
      if (r.positives == positives && r.negatives == negatives) return m;
    }
    throw Error(ErrorKind::kInvalidArgument, "ratio not simulated");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["eligible_users"] = eligible_users;
    j["skipped_users"] = skipped_users;
    ordered_json rows = ordered_json::array();
    for (const auto& [r, m] : per_ratio) {
      auto row = m.to_json();
      row["ratio"] = r.label();
      rows.push_back(row);
    }
    j["ratios"] = rows;
    return j;
  }
};

/// Positives are a user's held-out (valid and test) items rated at least
/// `positive_min_rating`; negatives are drawn uniformly from movies absent
/// from the user's whole history.
inline RankedList taste_list(const Catalog& catalog, const std::vector<MovieId>& positives,
                             const std::set<MovieId>& history, const TasteRatio& ratio, UserId user,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7461737465ull, user, ratio.positives, ratio.negatives));
  auto pos = positives;
  rng.shuffle(pos);
  pos.resize(std::min(pos.size(), ratio.positives));
  std::vector<MovieId> pool;
  for (const auto& [m, _] : catalog.movies) {
    if (!history.count(m)) pool.push_back(m);
  }
  if (pool.size() < ratio.negatives) throw Error(ErrorKind::kInvalidArgument, "not enough negatives");
  for (std::size_t i = 0; i < ratio.negatives; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  RankedList list;
  list.user_id = user;
  list.items = pos;
  list.items.insert(list.items.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(ratio.negatives));
  rng.shuffle(list.items);
  list.scores.assign(list.items.size(), 0.0);
  return list;
}

inline TasteResult taste_alignment_study(const Catalog& catalog, const DatasetSplit& split,
                                         const TasteOptions& options = {}) {
  std::map<UserId, std::vector<MovieId>> positives;
  std::map<UserId, std::set<MovieId>> history;
  for (const auto* part : {&split.train, &split.valid, &split.test}) {
    for (const auto& it : *part) history[it.user_id].insert(it.movie_id);
  }
  for (const auto* part : {&split.valid, &split.test}) {
    for (const auto& it : *part) {
      if (it.rating >= options.positive_min_rating) positives[it.user_id].push_back(it.movie_id);
    }
  }
  std::size_t needed = 0, needed_neg = 0;
  for (const auto& r : options.ratios) {
    needed = std::max(needed, r.positives);
    needed_neg = std::max(needed_neg, r.negatives);
  }

  std::vector<UserId> cohort = options.cohort;
  if (cohort.empty()) {
    for (const auto& [u, _] : catalog.users) cohort.push_back(u);
  }
  TasteResult result;
  std::vector<UserId> eligible;
  for (auto u : cohort) {
    // Heavy users may have seen too much of the catalog to draw negatives from.
    if (positives[u].size() >= needed && catalog.movies.size() - history[u].size() >= needed_neg) {
      eligible.push_back(u);
    } else {
      ++result.skipped_users;
    }
  }
  result.eligible_users = eligible.size();
  if (eligible.empty()) throw Error(ErrorKind::kInvalidArgument, "taste study: no user has enough held-out positives");

  const DeterministicEmbedder embedder;
  const Sandbox sandbox(catalog, options.sandbox);
  const RulePolicy policy(options.rule, &embedder);
  ProfileOptions popts;
  popts.image = &embedder;
  popts.vision_enabled = options.sandbox.vision_enabled;
  const auto contexts = build_user_contexts(catalog, split.train, eligible, popts);

  for (const auto& ratio : options.ratios) {
    std::vector<Event> merged;
    for (auto u : eligible) {
      const auto list = taste_list(catalog, positives[u], history[u], ratio, u, options.seed);
      LongTermMemory memory(u);
      SessionSpec spec{"taste-" + ratio.label() + "-u" + std::to_string(u), "taste-" + ratio.label(), list,
                       session_seed(options.seed, u, 0), std::nullopt};
      auto outcome = run_session(contexts.at(u).profile, policy, sandbox, memory, options.fatigue, spec);
      merged.insert(merged.end(), outcome.state.events.begin(), outcome.state.events.end());
    }
    result.per_ratio.emplace_back(ratio, compute_metrics(merged));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Activity traits

struct ActivityOptions {
  std::vector<UserId> cohort;  // empty: every user with training data
  std::uint64_t seed = 0;
  bool force_medium = false;   // null configuration
  RecommenderKind recommender = RecommenderKind::kFm;
  FmParams fm;
  SandboxConfig sandbox;
  FatigueConfig fatigue;
  RuleConfig rule;
};

struct TraitStats {
  ActivityTrait trait = ActivityTrait::kMedium;  // the group's label
  std::vector<std::int64_t> clicks;              // per session
  double mean = 0.0;
  std::vector<std::int64_t> histogram;           // bin i counts sessions with i clicks
};

struct ActivityResult {
  std::array<TraitStats, 3> groups;  // low, medium, high
  std::array<KsResult, 3> ks;        // (low,medium), (low,high), (medium,high)

  ordered_json to_json() const {
    ordered_json j = ordered_json::array();
    for (const auto& g : groups) {
      j.push_back({{"trait", to_string(g.trait)}, {"sessions", g.clicks.size()}, {"mean_clicks", g.mean},
                   {"histogram", g.histogram}});
    }
    ordered_json ks_j = ordered_json::array();
    const char* pairs[] = {"low-medium", "low-high", "medium-high"};
    for (std::size_t i = 0; i < 3; ++i) {
      ks_j.push_back({{"pair", pairs[i]}, {"statistic", ks[i].statistic}, {"p_value", ks[i].p_value}});
    }
    return {{"groups", j}, {"ks", ks_j}};
  }
};

/// Splits the cohort into three equal seeded groups labelled low, medium
/// and high (all medium under `force_medium`) and runs one session each.
inline ActivityResult activity_trait_study(const Catalog& catalog, const DatasetSplit& split,
                                           const ActivityOptions& options = {}) {
  auto cohort = options.cohort;
  if (cohort.empty()) cohort = select_cohort(catalog, split, {});
  if (cohort.size() < 3) throw Error(ErrorKind::kInvalidArgument, "activity study needs at least 3 users");
  Rng rng(derive_seed(options.seed, 0x7472616974ull));
  rng.shuffle(cohort);
  const std::size_t per_group = cohort.size() / 3;

  auto rec = make_recommender(options.recommender, options.fm);
  rec->fit(catalog, split.train, derive_seed(options.seed, 0x666974ull));
  const DeterministicEmbedder embedder;
  const Sandbox sandbox(catalog, options.sandbox);
  const RulePolicy policy(options.rule, &embedder);
  ProfileOptions popts;
  popts.image = &embedder;
  popts.vision_enabled = options.sandbox.vision_enabled;

  ActivityResult result;
  const ActivityTrait traits[] = {ActivityTrait::kLow, ActivityTrait::kMedium, ActivityTrait::kHigh};
  for (std::size_t g = 0; g < 3; ++g) {
    auto& stats = result.groups[g];
    stats.trait = traits[g];
    for (std::size_t i = g * per_group; i < (g + 1) * per_group; ++i) {
      const auto u = cohort[i];
      const auto history = history_of(catalog, split.train, u);
      User user = catalog.user(u);
      user.activity_trait = options.force_medium ? ActivityTrait::kMedium : traits[g];
      const auto profile = build_profile(user, history, popts);
      std::set<MovieId> seen;
      for (const auto& [it, _] : history) seen.insert(it.movie_id);
      LongTermMemory memory(u);
      SessionSpec spec{"activity-u" + std::to_string(u), "activity", recommend_unseen(*rec, u, options.sandbox.k, seen),
                       session_seed(options.seed, u, 0), std::nullopt};
      const auto outcome = run_session(profile, policy, sandbox, memory, options.fatigue, spec);
      stats.clicks.push_back(std::count_if(outcome.state.events.begin(), outcome.state.events.end(),
                                           [](const Event& e) { return e.kind == EventKind::kClick; }));
    }
    double sum = 0.0;
    for (auto c : stats.clicks) {
      sum += static_cast<double>(c);
      if (static_cast<std::size_t>(c) >= stats.histogram.size()) stats.histogram.resize(static_cast<std::size_t>(c) + 1, 0);
      ++stats.histogram[static_cast<std::size_t>(c)];
    }
    stats.mean = stats.clicks.empty() ? 0.0 : sum / static_cast<double>(stats.clicks.size());
  }
  auto as_double = [](const std::vector<std::int64_t>& v) { return std::vector<double>(v.begin(), v.end()); };
  const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 2}};
  for (std::size_t i = 0; i < 3; ++i) {
    result.ks[i] = ks_two_sample(as_double(result.groups[pairs[i].first].clicks),
                                 as_double(result.groups[pairs[i].second].clicks));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Augmentation export

enum class Signal { kClick, kView };

struct AugmentedRecord {
  UserId user_id = 0;
  MovieId movie_id = 0;
  Signal signal = Signal::kClick;
  std::optional<int> rating;
  std::int64_t timestamp = 0;
  std::string source;  // "<session_id>#<step>"

  bool operator==(const AugmentedRecord&) const = default;
};

enum class ExportFormat { kInteractions, kLabeled };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "interactions") return ExportFormat::kInteractions;
  if (s == "labeled") return ExportFormat::kLabeled;
  throw Error(ErrorKind::kInvalidArgument, "format must be interactions or labeled");
}

struct ExportCounts {
  std::int64_t clicks = 0;
  std::int64_t views = 0;
  std::int64_t collisions = 0;  // interactions rows dropped for a repeated key
};

/// Clicks become click records and watch+rate pairs become view records
/// carrying the rating.
inline std::vector<AugmentedRecord> augmented_records(const std::vector<TraceSession>& sessions) {
  std::vector<AugmentedRecord> out;
  for (const auto& s : sessions) {
    UserId user = s.user_id;
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      const auto& e = s.events[i];
      if (e.movie_ids.size() != 1) continue;
      const auto source = e.session_id + "#" + std::to_string(e.step);
      if (e.kind == EventKind::kClick) {
        out.push_back({user, e.movie_ids[0], Signal::kClick, std::nullopt, e.timestamp, source});
      } else if (e.kind == EventKind::kWatch) {
        std::optional<int> rating;
        if (i + 1 < s.events.size() && s.events[i + 1].kind == EventKind::kRate) rating = s.events[i + 1].rating;
        out.push_back({user, e.movie_ids[0], Signal::kView, rating, e.timestamp, source});
      }
    }
  }
  return out;
}

/// `interactions` writes ML-1M rating lines (clicks carry `click_rating`
/// since the layout requires one); `labeled` writes JSON-lines. Paired arms
/// replay the same users on the same session clock, so traces from several
/// arms can repeat a (user, movie, timestamp) key; the rating layout cannot
/// hold both, and only the first is written.
inline ExportCounts export_augmented(const std::vector<AugmentedRecord>& records, ExportFormat format,
                                     std::ostream& out, int click_rating = 3) {
  ExportCounts counts;
  std::set<std::tuple<UserId, MovieId, std::int64_t>> keys;
  for (const auto& r : records) {
    (r.signal == Signal::kClick ? counts.clicks : counts.views) += 1;
    if (format == ExportFormat::kInteractions) {
      if (!keys.emplace(r.user_id, r.movie_id, r.timestamp).second) {
        ++counts.collisions;
        continue;
      }
      const int rating = r.signal == Signal::kView && r.rating ? *r.rating : click_rating;
      out << r.user_id << "::" << r.movie_id << "::" << rating << "::" << r.timestamp << '\n';
    } else {
      ordered_json j;
      j["user_id"] = r.user_id;
      j["movie_id"] = r.movie_id;
      j["signal"] = r.signal == Signal::kClick ? "click" : "view";
      j["rating"] = r.rating ? ordered_json(*r.rating) : ordered_json(nullptr);
      j["timestamp"] = r.timestamp;
      j["source"] = r.source;
      out << j.dump() << '\n';
    }
  }
  return counts;
}

}  // namespace absim
