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

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "absim/catalog.hpp"
#include "absim/common.hpp"

namespace absim {

struct RankedList {
  UserId user_id = 0;
  std::vector<MovieId> items;
  std::vector<double> scores;  // parallel to items, non-increasing
  /// Fewer than the requested k items were available.
  bool short_list = false;
};

enum class RecommenderKind { kRandom, kPopularity, kFm, kExternal };

inline const char* to_string(RecommenderKind k) {
  switch (k) {
    case RecommenderKind::kRandom: return "random";
    case RecommenderKind::kPopularity: return "popularity";
    case RecommenderKind::kFm: return "fm";
    case RecommenderKind::kExternal: return "external";
  }
  return "?";
}

inline RecommenderKind parse_recommender_kind(std::string_view s) {
  if (s == "random") return RecommenderKind::kRandom;
  if (s == "popularity" || s == "pop") return RecommenderKind::kPopularity;
  if (s == "fm") return RecommenderKind::kFm;
  if (s == "external") return RecommenderKind::kExternal;
  throw Error(ErrorKind::kConfig, "unknown recommender kind '" + std::string(s) + "'");
}

/// Which one-hot / multi-hot blocks enter the FM.
struct FeatureSchema {
  bool user_id = true;
  bool movie_id = true;
  bool user_demographics = true;
  bool movie_genres = true;

  bool operator==(const FeatureSchema&) const = default;

  static FeatureSchema all() { return {}; }
  static FeatureSchema ids_only() { return {true, true, false, false}; }
  /// Ids plus item-side genres; user-side attributes dropped.
  static FeatureSchema item_side() { return {true, true, false, true}; }
  /// Ids plus user-side demographics; genres dropped.
  static FeatureSchema user_side() { return {true, true, true, false}; }

  static FeatureSchema parse(std::string_view name) {
    if (name == "all") return all();
    if (name == "ids" || name == "id_only") return ids_only();
    if (name == "item_side") return item_side();
    if (name == "user_side") return user_side();
    throw Error(ErrorKind::kConfig, "unknown feature schema '" + std::string(name) +
                                        "' (expected all | ids | item_side | user_side)");
  }

  json to_json() const {
    return {{"user_id", user_id}, {"movie_id", movie_id}, {"user_demographics", user_demographics},
            {"movie_genres", movie_genres}};
  }
  static FeatureSchema from_json(const json& j) {
    return {j.at("user_id").get<bool>(), j.at("movie_id").get<bool>(), j.at("user_demographics").get<bool>(),
            j.at("movie_genres").get<bool>()};
  }
};

struct FmParams {
  int latent_dim = 16;
  double learning_rate = 0.02;
  int epochs = 10;
  double l2 = 1e-4;
  int negatives_per_positive = 4;
  double init_std = 0.01;
  FeatureSchema schema;

  json to_json() const {
    return {{"latent_dim", latent_dim}, {"learning_rate", learning_rate}, {"epochs", epochs}, {"l2", l2},
            {"negatives_per_positive", negatives_per_positive}, {"init_std", init_std},
            {"schema", schema.to_json()}};
  }
  static FmParams from_json(const json& j) {
    FmParams p;
    p.latent_dim = j.value("latent_dim", p.latent_dim);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.epochs = j.value("epochs", p.epochs);
    p.l2 = j.value("l2", p.l2);
    p.negatives_per_positive = j.value("negatives_per_positive", p.negatives_per_positive);
    p.init_std = j.value("init_std", p.init_std);
    if (j.contains("schema")) {
      p.schema = j["schema"].is_string() ? FeatureSchema::parse(j["schema"].get<std::string>())
                                         : FeatureSchema::from_json(j["schema"]);
    }
    return p;
  }
};

/// Orders by descending score, then ascending movie_id.
inline void sort_ranked(std::vector<std::pair<double, MovieId>>& scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
}

/// Common base: seen-set bookkeeping, popularity fallback for unknown
/// users, top-k selection and checkpoint framing. Fitted instances are
/// immutable and may be shared by concurrent sessions.
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual RecommenderKind kind() const = 0;

  void fit(const Catalog& catalog, const std::vector<Interaction>& train, std::uint64_t seed) {
    if (train.empty() && kind() != RecommenderKind::kRandom && kind() != RecommenderKind::kExternal) {
      throw Error(ErrorKind::kInvalidArgument, std::string(to_string(kind())) + " requires non-empty train");
    }
    seed_ = seed;
    universe_.clear();
    for (const auto& [id, _] : catalog.movies) universe_.push_back(id);
    seen_.clear();
    counts_.clear();
    for (const auto& it : train) {
      seen_[it.user_id].insert(it.movie_id);
      ++counts_[it.movie_id];
    }
    fit_model(catalog, train, seed);
  }

  /// Top-k unseen items. Unknown users get the popularity order.
  RankedList recommend(UserId user, std::size_t k) const {
    if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be positive");
    RankedList out;
    out.user_id = user;
    std::optional<std::vector<std::pair<double, MovieId>>> scored;
    if (knows_user(user) || kind() == RecommenderKind::kExternal) scored = score_user(user, k);
    const bool verbatim = scored && kind() == RecommenderKind::kExternal;
    if (!scored) scored = popularity_scores();
    if (!verbatim) {
      const auto& seen_items = seen(user);
      std::erase_if(*scored, [&](const auto& p) { return seen_items.count(p.second) > 0; });
      sort_ranked(*scored);
    }
    const std::size_t n = std::min(k, scored->size());
    out.short_list = n < k;
    for (std::size_t i = 0; i < n; ++i) {
      out.items.push_back((*scored)[i].second);
      out.scores.push_back((*scored)[i].first);
    }
    return out;
  }

  const std::set<MovieId>& seen(UserId user) const {
    static const std::set<MovieId> kEmpty;
    auto it = seen_.find(user);
    return it == seen_.end() ? kEmpty : it->second;
  }

  bool knows_user(UserId user) const { return seen_.count(user) > 0; }

  const std::vector<MovieId>& universe() const { return universe_; }

  json to_json() const {
    json j;
    j["format"] = "absim.recommender";
    j["version"] = 1;
    j["kind"] = to_string(kind());
    j["seed"] = seed_;
    j["universe"] = universe_;
    json seen = json::array();
    for (const auto& [u, items] : seen_) seen.push_back({u, std::vector<MovieId>(items.begin(), items.end())});
    j["seen"] = seen;
    json counts = json::array();
    for (const auto& [m, c] : counts_) counts.push_back({m, c});
    j["popularity"] = counts;
    j["model"] = model_to_json();
    return j;
  }

  static std::unique_ptr<Recommender> from_json(const json& j);

 protected:
  virtual void fit_model(const Catalog& catalog, const std::vector<Interaction>& train, std::uint64_t seed) = 0;
  /// Candidate (score, movie) pairs for a known user; nullopt defers to popularity.
  virtual std::optional<std::vector<std::pair<double, MovieId>>> score_user(UserId user, std::size_t k) const = 0;
  virtual json model_to_json() const { return json::object(); }
  virtual void model_from_json(const json&) {}

  std::vector<std::pair<double, MovieId>> popularity_scores() const {
    std::vector<std::pair<double, MovieId>> out;
    out.reserve(universe_.size());
    for (auto m : universe_) {
      auto it = counts_.find(m);
      out.emplace_back(it == counts_.end() ? 0.0 : static_cast<double>(it->second), m);
    }
    return out;
  }

  std::uint64_t seed_ = 0;
  std::vector<MovieId> universe_;
  std::map<UserId, std::set<MovieId>> seen_;
  std::map<MovieId, std::int64_t> counts_;
};

class RandomRecommender final : public Recommender {
 public:
  RecommenderKind kind() const override { return RecommenderKind::kRandom; }

 protected:
  void fit_model(const Catalog&, const std::vector<Interaction>&, std::uint64_t) override {}

  std::optional<std::vector<std::pair<double, MovieId>>> score_user(UserId user, std::size_t) const override {
    std::vector<std::pair<double, MovieId>> out;
    out.reserve(universe_.size());
    for (auto m : universe_) out.emplace_back(to_unit(derive_seed(seed_, user, m)), m);
    return out;
  }
};

class PopularityRecommender final : public Recommender {
 public:
  RecommenderKind kind() const override { return RecommenderKind::kPopularity; }

 protected:
  void fit_model(const Catalog&, const std::vector<Interaction>&, std::uint64_t) override {}

  std::optional<std::vector<std::pair<double, MovieId>>> score_user(UserId, std::size_t) const override {
    return popularity_scores();
  }
};

/// Second-order factorization machine trained pointwise on implicit
/// feedback: each train interaction is a positive, paired with uniformly
/// sampled unseen negatives, under logistic loss with plain SGD.
class FmRecommender final : public Recommender {
 public:
  explicit FmRecommender(FmParams params = {}) : params_(params) {}

  RecommenderKind kind() const override { return RecommenderKind::kFm; }

  const FmParams& params() const { return params_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// More than one epoch-over-epoch increase in training loss.
  bool converged() const {
    int upticks = 0;
    for (std::size_t i = 1; i < loss_history_.size(); ++i) {
      if (loss_history_[i] > loss_history_[i - 1]) ++upticks;
    }
    return upticks <= 1;
  }

  /// Raw model output for a (user, movie) pair; finite for every catalog pair.
  double score(UserId user, MovieId movie) const {
    const auto& uf = feature_list(user_features_, user);
    const auto& mf = feature_list(movie_features_, movie);
    std::vector<double> sum(static_cast<std::size_t>(params_.latent_dim), 0.0);
    double linear = bias_, sq = 0.0;
    for (const auto* list : {&uf, &mf}) {
      for (const auto& [idx, x] : *list) {
        linear += weights_[idx] * x;
        const double* v = &factors_[idx * dim()];
        for (std::size_t f = 0; f < dim(); ++f) {
          sum[f] += v[f] * x;
          sq += v[f] * v[f] * x * x;
        }
      }
    }
    double pair = 0.0;
    for (double s : sum) pair += s * s;
    return linear + 0.5 * (pair - sq);
  }

 protected:
  using FeatureList = std::vector<std::pair<std::size_t, double>>;

  void fit_model(const Catalog& catalog, const std::vector<Interaction>& train, std::uint64_t seed) override {
    if (params_.latent_dim <= 0) throw Error(ErrorKind::kInvalidArgument, "fm latent_dim must be positive");
    if (params_.epochs <= 0 || params_.negatives_per_positive < 0) {
      throw Error(ErrorKind::kInvalidArgument, "fm epochs must be positive and negatives non-negative");
    }
    build_features(catalog, train);

    Rng init(derive_seed(seed, 0xf0));
    bias_ = 0.0;
    weights_.assign(feature_names_.size(), 0.0);
    factors_.resize(feature_names_.size() * dim());
    for (auto& v : factors_) v = params_.init_std * init.normal();

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    loss_history_.clear();
    std::vector<double> grad_sum(dim());
    for (int epoch = 0; epoch < params_.epochs; ++epoch) {
      Rng rng(derive_seed(seed, 0xe0, epoch));
      rng.shuffle(order);
      double loss = 0.0;
      std::size_t samples = 0;
      for (auto idx : order) {
        const auto& pos = train[idx];
        const auto& seen = seen_.at(pos.user_id);
        loss += sgd_step(pos.user_id, pos.movie_id, 1.0, grad_sum);
        ++samples;
        if (seen.size() >= universe_.size()) continue;
        for (int n = 0; n < params_.negatives_per_positive; ++n) {
          MovieId neg;
          do {
            neg = universe_[rng.below(universe_.size())];
          } while (seen.count(neg));
          loss += sgd_step(pos.user_id, neg, 0.0, grad_sum);
          ++samples;
        }
      }
      loss_history_.push_back(loss / static_cast<double>(samples));
    }
  }

  std::optional<std::vector<std::pair<double, MovieId>>> score_user(UserId user, std::size_t) const override {
    std::vector<std::pair<double, MovieId>> out;
    out.reserve(universe_.size());
    for (auto m : universe_) out.emplace_back(score(user, m), m);
    return out;
  }

  json model_to_json() const override {
    json j;
    j["params"] = params_.to_json();
    j["features"] = feature_names_;
    j["bias"] = bias_;
    j["weights"] = weights_;
    j["factors"] = factors_;
    j["loss_history"] = loss_history_;
    auto lists = [](const std::map<std::int64_t, FeatureList>& m) {
      json arr = json::array();
      for (const auto& [id, list] : m) {
        json feats = json::array();
        for (const auto& [idx, x] : list) feats.push_back({idx, x});
        arr.push_back({id, feats});
      }
      return arr;
    };
    j["user_features"] = lists(user_features_);
    j["movie_features"] = lists(movie_features_);
    return j;
  }

  void model_from_json(const json& j) override {
    params_ = FmParams::from_json(j.at("params"));
    feature_names_ = j.at("features").get<std::vector<std::string>>();
    bias_ = j.at("bias").get<double>();
    weights_ = j.at("weights").get<std::vector<double>>();
    factors_ = j.at("factors").get<std::vector<double>>();
    loss_history_ = j.at("loss_history").get<std::vector<double>>();
    if (weights_.size() != feature_names_.size() || factors_.size() != feature_names_.size() * dim()) {
      throw Error(ErrorKind::kParse, "fm checkpoint: parameter sizes disagree with feature count");
    }
    auto lists = [](const json& arr) {
      std::map<std::int64_t, FeatureList> m;
      for (const auto& row : arr) {
        FeatureList list;
        for (const auto& f : row.at(1)) list.emplace_back(f.at(0).get<std::size_t>(), f.at(1).get<double>());
        m.emplace(row.at(0).get<std::int64_t>(), std::move(list));
      }
      return m;
    };
    user_features_ = lists(j.at("user_features"));
    movie_features_ = lists(j.at("movie_features"));
  }

 private:
  std::size_t dim() const { return static_cast<std::size_t>(params_.latent_dim); }

  static const FeatureList& feature_list(const std::map<std::int64_t, FeatureList>& m, std::int64_t id) {
    static const FeatureList kEmpty;
    auto it = m.find(id);
    return it == m.end() ? kEmpty : it->second;
  }

  void build_features(const Catalog& catalog, const std::vector<Interaction>& train) {
    feature_names_.clear();
    std::unordered_map<std::string, std::size_t> index;
    auto intern = [&](const std::string& name) {
      auto [it, inserted] = index.emplace(name, feature_names_.size());
      if (inserted) feature_names_.push_back(name);
      return it->second;
    };
    user_features_.clear();
    movie_features_.clear();
    std::set<UserId> users;
    for (const auto& it : train) users.insert(it.user_id);
    for (auto uid : users) {
      FeatureList list;
      if (params_.schema.user_id) list.emplace_back(intern("user:" + std::to_string(uid)), 1.0);
      if (params_.schema.user_demographics) {
        const auto& u = catalog.user(uid);
        list.emplace_back(intern(std::string("gender:") + (u.gender == Gender::kMale ? "M" : "F")), 1.0);
        list.emplace_back(intern("age:" + std::to_string(u.age)), 1.0);
        list.emplace_back(intern("occupation:" + std::to_string(u.occupation)), 1.0);
      }
      user_features_.emplace(uid, std::move(list));
    }
    for (const auto& [mid, m] : catalog.movies) {
      FeatureList list;
      if (params_.schema.movie_id) list.emplace_back(intern("movie:" + std::to_string(mid)), 1.0);
      if (params_.schema.movie_genres && !m.genres.empty()) {
        const double x = 1.0 / static_cast<double>(m.genres.size());
        for (const auto& g : m.genres) list.emplace_back(intern("genre:" + g), x);
      }
      movie_features_.emplace(mid, std::move(list));
    }
  }

  double sgd_step(UserId user, MovieId movie, double label, std::vector<double>& sum) {
    const auto& uf = feature_list(user_features_, user);
    const auto& mf = feature_list(movie_features_, movie);
    std::fill(sum.begin(), sum.end(), 0.0);
    double y = bias_, sq = 0.0;
    for (const auto* list : {&uf, &mf}) {
      for (const auto& [idx, x] : *list) {
        y += weights_[idx] * x;
        const double* v = &factors_[idx * dim()];
        for (std::size_t f = 0; f < dim(); ++f) {
          sum[f] += v[f] * x;
          sq += v[f] * v[f] * x * x;
        }
      }
    }
    double pair = 0.0;
    for (double s : sum) pair += s * s;
    y += 0.5 * (pair - sq);

    const double p = 1.0 / (1.0 + std::exp(-y));
    const double loss = label > 0.5 ? -std::log(std::max(p, 1e-12)) : -std::log(std::max(1.0 - p, 1e-12));
    const double g = p - label;
    const double lr = params_.learning_rate;
    bias_ -= lr * g;
    for (const auto* list : {&uf, &mf}) {
      for (const auto& [idx, x] : *list) {
        weights_[idx] -= lr * (g * x + params_.l2 * weights_[idx]);
        double* v = &factors_[idx * dim()];
        for (std::size_t f = 0; f < dim(); ++f) {
          const double grad = g * x * (sum[f] - v[f] * x) + params_.l2 * v[f];
          v[f] -= lr * grad;
        }
      }
    }
    return loss;
  }

  FmParams params_;
  std::vector<std::string> feature_names_;
  double bias_ = 0.0;
  std::vector<double> weights_;
  std::vector<double> factors_;  // row-major [feature][latent_dim]
  std::vector<double> loss_history_;
  std::map<std::int64_t, FeatureList> user_features_;
  std::map<std::int64_t, FeatureList> movie_features_;
};

/// Precomputed top-K lists from models trained elsewhere, served verbatim.
///
/// Lists are passed through untouched (no seen filtering): the producer owns
/// their content. Users absent from the file fall back to popularity when
/// the adapter was fitted on a train set.
class ExternalRecommender final : public Recommender {
 public:
  ExternalRecommender() = default;
  explicit ExternalRecommender(std::map<UserId, std::vector<MovieId>> lists) : lists_(std::move(lists)) {}

  RecommenderKind kind() const override { return RecommenderKind::kExternal; }

  /// JSON-lines of {"user_id": u, "items": [...]}; each list must hold at least `min_length` items.
  static ExternalRecommender load(const std::filesystem::path& path, std::size_t min_length = 0) {
    const auto lines = detail::read_lines(path);
    std::map<UserId, std::vector<MovieId>> lists;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto where = path.filename().string() + ":" + std::to_string(i + 1);
      try {
        const auto j = json::parse(lines[i]);
        const auto uid = j.at("user_id").get<UserId>();
        auto items = j.at("items").get<std::vector<MovieId>>();
        if (items.size() < min_length) {
          throw Error(ErrorKind::kParse, where + ": list for user " + std::to_string(uid) + " has " +
                                             std::to_string(items.size()) + " items, need " +
                                             std::to_string(min_length));
        }
        if (std::set<MovieId>(items.begin(), items.end()).size() != items.size()) {
          throw Error(ErrorKind::kParse, where + ": duplicate items");
        }
        if (!lists.emplace(uid, std::move(items)).second) {
          throw Error(ErrorKind::kParse, where + ": duplicate user_id " + std::to_string(uid));
        }
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kParse, where + ": " + e.what());
      }
    }
    return ExternalRecommender(std::move(lists));
  }

 protected:
  void fit_model(const Catalog&, const std::vector<Interaction>&, std::uint64_t) override {}

  std::optional<std::vector<std::pair<double, MovieId>>> score_user(UserId user, std::size_t) const override {
    auto it = lists_.find(user);
    if (it == lists_.end()) return std::nullopt;
    std::vector<std::pair<double, MovieId>> out;
    const auto n = it->second.size();
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(static_cast<double>(n - i), it->second[i]);
    return out;
  }

  json model_to_json() const override {
    json arr = json::array();
    for (const auto& [u, items] : lists_) arr.push_back({u, items});
    return {{"lists", arr}};
  }

  void model_from_json(const json& j) override {
    lists_.clear();
    for (const auto& row : j.at("lists")) lists_.emplace(row.at(0).get<UserId>(), row.at(1).get<std::vector<MovieId>>());
  }

 private:
  std::map<UserId, std::vector<MovieId>> lists_;
};

inline std::unique_ptr<Recommender> make_recommender(RecommenderKind kind, const FmParams& fm = {}) {
  switch (kind) {
    case RecommenderKind::kRandom: return std::make_unique<RandomRecommender>();
    case RecommenderKind::kPopularity: return std::make_unique<PopularityRecommender>();
    case RecommenderKind::kFm: return std::make_unique<FmRecommender>(fm);
    case RecommenderKind::kExternal: return std::make_unique<ExternalRecommender>();
  }
  throw Error(ErrorKind::kInternal, "unreachable recommender kind");
}

inline std::unique_ptr<Recommender> Recommender::from_json(const json& j) {
  if (j.value("format", "") != "absim.recommender") throw Error(ErrorKind::kParse, "not a recommender checkpoint");
  if (j.value("version", 0) != 1) throw Error(ErrorKind::kParse, "unsupported checkpoint version");
  auto rec = make_recommender(parse_recommender_kind(j.at("kind").get<std::string>()));
  rec->seed_ = j.at("seed").get<std::uint64_t>();
  rec->universe_ = j.at("universe").get<std::vector<MovieId>>();
  for (const auto& row : j.at("seen")) {
    const auto items = row.at(1).get<std::vector<MovieId>>();
    rec->seen_[row.at(0).get<UserId>()] = std::set<MovieId>(items.begin(), items.end());
  }
  for (const auto& row : j.at("popularity")) rec->counts_[row.at(0).get<MovieId>()] = row.at(1).get<std::int64_t>();
  rec->model_from_json(j.at("model"));
  return rec;
}

inline void save_checkpoint(const Recommender& rec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kMissingInput, "cannot write '" + path.string() + "'");
  out << rec.to_json().dump() << '\n';
}

inline std::unique_ptr<Recommender> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot open '" + path.string() + "'");
  try {
    return Recommender::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Offline ranking metrics (binary relevance)

/// |top-k ∩ relevant| / |relevant|; 0 for an empty relevant set.
inline double recall_at_k(const RankedList& ranked, const std::set<MovieId>& relevant, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
  if (relevant.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.items.size()); ++i) hits += relevant.count(ranked.items[i]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// DCG@k / IDCG@k with gain 1 per relevant item and 1/log2(rank+1) discount.
inline double ndcg_at_k(const RankedList& ranked, const std::set<MovieId>& relevant, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.items.size()); ++i) {
    if (relevant.count(ranked.items[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

}  // namespace absim
