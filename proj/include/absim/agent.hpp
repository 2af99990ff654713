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

// The simulated user: profile, fatigue budget, decision policies and the
// per-session loop that ties them to the sandbox and memory.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "absim/catalog.hpp"
#include "absim/common.hpp"
#include "absim/memory.hpp"
#include "absim/sandbox.hpp"

namespace absim {

// ---------------------------------------------------------------------------
// Text generation

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
};

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::uint64_t> seed;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  /// Throws Error(kTransport) once its own retries are exhausted.
  virtual std::string generate(const std::vector<ChatMessage>& messages, const SamplingParams& params) = 0;
};

// ---------------------------------------------------------------------------
// Prompt templates

namespace templates {

inline constexpr const char* kPreferenceV1 =
    R"(System Instruction: You are given a user's movie interaction history. Assume the role of user. Your task is to write a clean, concise, and well-structured user preferences (taste) summary in the first person.

Guidelines:
1. Genres: Identify and list the genres you prefer.
2. Directors: Mention directors whose works you consistently enjoy.
3. Actors: Highlight actors whose performances you appreciate.
4. Release Date Patterns: Note any trends in the release years of the movies you watch.
5. Rating Tendencies: Describe my typical ratings for different types of movies or score ranges.
6. Poster Style Preference: Based on the movie interaction history, summarize the user's preference for movie poster aesthetics, such as color schemes, compositions, and character depictions.
7. Conciseness: Summarize the preferences in a manner that is clear and to the point.
If no clear preferences are found, indicate this with 'not found'. Do not give any information that is not related to user preference.

Input (User History): {history}
Response Requirement: Remember, don't blindly repeat the contexts verbatim.
)";

inline constexpr const char* kDecisionSystemV1 =
    R"(You are role-playing a real person browsing a movie recommendation website. Stay in character as the user described in the profile. Each turn you are shown the current page and must choose exactly one of the legal actions.

Home pages show five movie cards. You may Click a card to open its detail page, move with NextPage or PrevPage, or Exit. On a detail page you may WatchAndRate the movie, go Back to the home page, or Exit. Every action costs energy; when your fatigue reaches its limit you leave.

Reply with a single JSON object and nothing else:
{"action": "<legal action name>", "args": {"movie_id": <id, Click only>, "rating": <1-5, WatchAndRate only>}, "interest": <1-5>, "reason": "<one short sentence>"}
"interest" is how appealing the current page content is to you, from 1 (not at all) to 5 (very).
)";

inline constexpr const char* kDecisionUserV1 = R"(Profile:
{profile}

Memories:
{memories}

Fatigue: {fatigue}

Current page:
{observation}

Legal actions: {legal_actions}
)";

/// Substitutes `{name}` placeholders. Every placeholder in the template
/// must be supplied; braces not enclosing an identifier are left alone.
inline std::string fill(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  static const std::regex kPlaceholder(R"(\{([a-z_]+)\})");
  std::string out;
  auto begin = std::sregex_iterator(tmpl.begin(), tmpl.end(), kPlaceholder);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto key = m[1].str();
    auto v = values.find(key);
    if (v == values.end()) throw Error(ErrorKind::kConfig, "template placeholder {" + key + "} has no value");
    out.append(tmpl, last, static_cast<std::size_t>(m.position(0)) - last);
    out += v->second;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(tmpl, last, std::string::npos);
  return out;
}

}  // namespace templates

struct PromptTemplates {
  std::string preference = templates::kPreferenceV1;
  std::string decision_system = templates::kDecisionSystemV1;
  std::string decision_user = templates::kDecisionUserV1;

  /// Reads preference.v1.txt, decision_system.v1.txt and decision_user.v1.txt.
  static PromptTemplates from_directory(const std::filesystem::path& dir) {
    auto slurp = [&](const char* name) {
      std::ifstream in(dir / name, std::ios::binary);
      if (!in) throw Error(ErrorKind::kMissingInput, "missing template " + (dir / name).string());
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    return {slurp("preference.v1.txt"), slurp("decision_system.v1.txt"), slurp("decision_user.v1.txt")};
  }
};

// ---------------------------------------------------------------------------
// Profile

inline constexpr std::array<const char*, 6> kPreferenceSections = {
    "Genres", "Directors", "Actors", "Release Date Patterns", "Rating Tendencies", "Poster Style Preference"};

inline constexpr const char* kNotFound = "not found";

struct PreferenceSummary {
  std::array<std::string, 6> sections;  // indexed like kPreferenceSections
  bool generated = false;               // false when built by the fallback

  std::string render() const {
    std::string s;
    for (std::size_t i = 0; i < sections.size(); ++i) {
      if (i) s += '\n';
      s += std::string(kPreferenceSections[i]) + ": " + sections[i];
    }
    return s;
  }

  /// Recovers the sections from free text that names each heading (case
  /// and markdown decoration tolerated). Missing headings are an error.
  static PreferenceSummary parse(const std::string& text) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    std::array<std::size_t, 6> at{};
    for (std::size_t i = 0; i < kPreferenceSections.size(); ++i) {
      std::string h = kPreferenceSections[i];
      std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
      at[i] = lower.find(h);
      if (at[i] == std::string::npos) {
        throw Error(ErrorKind::kParse, std::string("preference summary lacks section '") + kPreferenceSections[i] + "'");
      }
    }
    PreferenceSummary p;
    p.generated = true;
    for (std::size_t i = 0; i < at.size(); ++i) {
      std::size_t begin = at[i] + std::string_view(kPreferenceSections[i]).size();
      std::size_t end = text.size();
      for (auto other : at) {
        if (other > at[i] && other < end) end = other;
      }
      std::string body = text.substr(begin, end - begin);
      // Strip decoration left around the heading and the start of the next one.
      const std::string junk = " \t\r\n*:#-_0123456789.";
      const auto b = body.find_first_not_of(junk);
      const auto e = body.find_last_not_of(junk + "(");
      body = b == std::string::npos ? "" : body.substr(b, e - b + 1);
      p.sections[i] = body.empty() ? kNotFound : body;
    }
    return p;
  }
};

/// Numeric taste signals the rule policy reads; derived from the same
/// history as the summary.
struct PreferenceSignals {
  std::vector<std::string> top_genres;     // rating-weighted, at most 3
  std::map<std::string, double> genre_weight;
  std::optional<Embedding> poster_style;   // mean embedding of liked posters
};

struct Profile {
  UserId user_id = 0;
  User demographics;
  PreferenceSummary preference_summary;
  ActivityTrait activity_trait = ActivityTrait::kMedium;
  PreferenceSignals signals;

  std::string render() const {
    const auto& d = demographics;
    std::string s = "I am a " + std::string(d.gender == Gender::kFemale ? "female" : "male") + " user, age bucket " +
                    std::to_string(d.age) + ", occupation code " + std::to_string(d.occupation) + ".";
    s += "\nActivity level: " + std::string(to_string(activity_trait)) + ".";
    s += "\nMy preferences:\n" + preference_summary.render();
    return s;
  }
};

using History = std::vector<std::pair<Interaction, Movie>>;

inline History history_of(const Catalog& catalog, const std::vector<Interaction>& interactions, UserId user) {
  History h;
  for (const auto& it : interactions) {
    if (it.user_id == user) h.emplace_back(it, catalog.movie(it.movie_id));
  }
  std::stable_sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.first.timestamp < b.first.timestamp; });
  return h;
}

namespace detail {

/// Release year from metadata, else from a trailing "(YYYY)" in the title.
inline std::optional<int> release_year(const Movie& m) {
  if (m.release_date) return m.release_date->year;
  const auto open = m.title.rfind('(');
  if (open != std::string::npos && open + 6 <= m.title.size() && m.title[open + 5] == ')') {
    int y = 0;
    for (std::size_t i = open + 1; i < open + 5; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(m.title[i]))) return std::nullopt;
      y = y * 10 + (m.title[i] - '0');
    }
    return y;
  }
  return std::nullopt;
}

/// Keys by descending weight, ties alphabetical.
inline std::vector<std::string> top_keys(const std::map<std::string, double>& weights, std::size_t n) {
  std::vector<std::pair<std::string, double>> v(weights.begin(), weights.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size() && i < n; ++i) out.push_back(v[i].first);
  return out;
}

inline std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline std::string history_line(const Interaction& it, const Movie& m, bool with_poster) {
  std::string s = m.title + " | " + join(m.genres, "|") + " | rated " + std::to_string(it.rating);
  if (auto y = release_year(m)) s += " | released " + std::to_string(*y);
  if (!m.directors.empty()) s += " | directed by " + join(m.directors, ", ");
  if (!m.actors.empty()) s += " | starring " + join(m.actors, ", ");
  if (with_poster && m.poster_ref) s += " | poster " + *m.poster_ref;
  return s;
}

}  // namespace detail

/// Rating-weighted genre signal: each history item adds its rating to each
/// of its genres.
inline PreferenceSignals compute_signals(const History& history, const EmbeddingProvider* image = nullptr) {
  PreferenceSignals s;
  for (const auto& [it, m] : history) {
    for (const auto& g : m.genres) s.genre_weight[g] += it.rating;
  }
  s.top_genres = detail::top_keys(s.genre_weight, 3);
  if (image) {
    // Posters of liked movies; everything watched when nothing was liked.
    for (int min_rating : {4, 1}) {
      Embedding acc(image->dimension(), 0.0);
      std::size_t n = 0;
      for (const auto& [it, m] : history) {
        if (it.rating < min_rating || !m.poster_ref || m.poster_ref->empty()) continue;
        const auto e = image->embed(*m.poster_ref);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += e[d];
        ++n;
      }
      if (n) {
        double norm = 0.0;
        for (double x : acc) norm += x * x;
        if (norm > 0.0) {
          for (double& x : acc) x /= std::sqrt(norm);
          s.poster_style = std::move(acc);
        }
        break;
      }
    }
  }
  return s;
}

/// Deterministic summary used when no generator is configured or it fails.
inline PreferenceSummary fallback_preference_summary(const History& history) {
  PreferenceSummary p;
  p.sections.fill(kNotFound);
  if (history.empty()) return p;

  std::map<std::string, double> genre_w, director_w, actor_w;
  std::map<std::string, std::pair<double, int>> genre_rating;
  std::map<int, int> decades;
  double rating_sum = 0.0;
  for (const auto& [it, m] : history) {
    rating_sum += it.rating;
    for (const auto& g : m.genres) {
      genre_w[g] += it.rating;
      genre_rating[g].first += it.rating;
      genre_rating[g].second += 1;
    }
    for (const auto& d : m.directors) director_w[d] += it.rating;
    for (const auto& a : m.actors) actor_w[a] += it.rating;
    if (auto y = detail::release_year(m)) decades[*y / 10 * 10] += 1;
  }

  if (auto g = detail::top_keys(genre_w, 3); !g.empty()) p.sections[0] = "I prefer " + join(g, ", ") + ".";
  if (auto d = detail::top_keys(director_w, 3); !d.empty()) {
    p.sections[1] = "I consistently enjoy films by " + join(d, ", ") + ".";
  }
  if (auto a = detail::top_keys(actor_w, 3); !a.empty()) p.sections[2] = "I appreciate performances by " + join(a, ", ") + ".";
  if (!decades.empty()) {
    auto best = decades.begin();
    for (auto it = decades.begin(); it != decades.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    p.sections[3] = "I mostly watch " + std::to_string(best->first) + "s releases (" + std::to_string(best->second) +
                    " of " + std::to_string(history.size()) + ").";
  }
  std::map<std::string, double> mean;
  for (const auto& [g, acc] : genre_rating) mean[g] = acc.first / acc.second;
  std::vector<std::string> parts;
  for (const auto& g : detail::top_keys(mean, mean.size())) parts.push_back(g + " " + detail::fixed1(mean[g]));
  p.sections[4] = "My average rating is " + detail::fixed1(rating_sum / static_cast<double>(history.size())) +
                  ". By genre: " + join(parts, ", ") + ".";
  return p;
}

struct PreferenceResult {
  PreferenceSummary summary;
  std::vector<std::string> warnings;
};

/// Asks `generator` (when given) for a summary and validates its sections,
/// falling back to the deterministic aggregation on any failure.
inline PreferenceResult build_preference_summary(const History& history, TextGenerator* generator,
                                                 const PromptTemplates& prompts = {}, bool vision_enabled = true,
                                                 const SamplingParams& params = {}) {
  PreferenceResult r;
  if (generator && !history.empty()) {
    std::vector<std::string> lines;
    for (const auto& [it, m] : history) lines.push_back(detail::history_line(it, m, vision_enabled));
    const auto prompt = templates::fill(prompts.preference, {{"history", "\n" + join(lines, "\n")}});
    try {
      r.summary = PreferenceSummary::parse(generator->generate({{"user", prompt}}, params));
      return r;
    } catch (const Error& e) {
      r.warnings.push_back(std::string("preference generation failed, using fallback: ") + e.what());
    }
  }
  r.summary = fallback_preference_summary(history);
  return r;
}

struct ProfileOptions {
  TextGenerator* generator = nullptr;
  const EmbeddingProvider* image = nullptr;
  PromptTemplates prompts;
  bool vision_enabled = true;
};

inline Profile build_profile(const User& user, const History& history, const ProfileOptions& options = {},
                             std::vector<std::string>* warnings = nullptr) {
  Profile p;
  p.user_id = user.user_id;
  p.demographics = user;
  p.activity_trait = user.activity_trait;
  auto pref = build_preference_summary(history, options.generator, options.prompts, options.vision_enabled);
  p.preference_summary = std::move(pref.summary);
  if (warnings) warnings->insert(warnings->end(), pref.warnings.begin(), pref.warnings.end());
  p.signals = compute_signals(history, options.vision_enabled ? options.image : nullptr);
  return p;
}

// ---------------------------------------------------------------------------
// Fatigue

struct FatigueConfig {
  double budget = 30.0;
  std::map<ActionKind, double> base_cost = {
      {ActionKind::kClick, 2.0},    {ActionKind::kWatchAndRate, 10.0}, {ActionKind::kPrevPage, 2.0},
      {ActionKind::kNextPage, 2.0}, {ActionKind::kBack, 5.0},          {ActionKind::kExit, 0.0}};
  double phi_max = 1.0;
  double phi_min = 1.0;
  int interest_min = 1;
  int interest_max = 5;

  void validate() const {
    // A zero budget is accepted: the session is then a single forced exit.
    if (!(budget >= 0.0)) throw Error(ErrorKind::kConfig, "fatigue budget must be >= 0");
    for (auto k : kAllActionKinds) {
      auto it = base_cost.find(k);
      if (it == base_cost.end()) throw Error(ErrorKind::kConfig, std::string("fatigue cost missing for ") + to_string(k));
      if (!(it->second >= 0.0)) throw Error(ErrorKind::kConfig, std::string("negative fatigue cost for ") + to_string(k));
    }
    if (!(phi_min > 0.0) || phi_max < phi_min) throw Error(ErrorKind::kConfig, "need phi_max >= phi_min > 0");
    if (interest_min >= interest_max) throw Error(ErrorKind::kConfig, "need interest_min < interest_max");
  }

  /// Named presets: "mini-column" (default), "4o-column", and
  /// "mini-column-modulated" (mini costs with phi_min 0.5).
  static FatigueConfig preset(std::string_view name) {
    FatigueConfig c;
    if (name == "mini-column") return c;
    if (name == "4o-column") {
      c.base_cost = {{ActionKind::kClick, 15.0},   {ActionKind::kWatchAndRate, 40.0}, {ActionKind::kPrevPage, 2.0},
                     {ActionKind::kNextPage, 2.0}, {ActionKind::kBack, 2.0},          {ActionKind::kExit, 0.0}};
      return c;
    }
    if (name == "mini-column-modulated") {
      c.phi_min = 0.5;
      return c;
    }
    throw Error(ErrorKind::kConfig, "unknown fatigue preset '" + std::string(name) +
                                        "' (expected mini-column, 4o-column or mini-column-modulated)");
  }

  json to_json() const {
    json costs = json::object();
    for (const auto& [k, v] : base_cost) costs[to_string(k)] = v;
    return {{"budget", budget},   {"base_cost", costs},        {"phi_max", phi_max},
            {"phi_min", phi_min}, {"interest_min", interest_min}, {"interest_max", interest_max}};
  }

  /// Accepts {"preset": name} plus any field overrides.
  static FatigueConfig from_json(const json& j) {
    FatigueConfig c = preset(j.value("preset", std::string("mini-column")));
    c.budget = j.value("budget", c.budget);
    if (j.contains("base_cost")) {
      for (const auto& [k, v] : j["base_cost"].items()) {
        auto kind = parse_action_kind(k);
        if (!kind) throw Error(ErrorKind::kConfig, "unknown action '" + k + "' in fatigue base_cost");
        c.base_cost[*kind] = v.get<double>();
      }
    }
    c.phi_max = j.value("phi_max", c.phi_max);
    c.phi_min = j.value("phi_min", c.phi_min);
    c.interest_min = j.value("interest_min", c.interest_min);
    c.interest_max = j.value("interest_max", c.interest_max);
    c.validate();
    return c;
  }
};

/// F = C_a * (phi_max - (i - i_min)(phi_max - phi_min) / (i_max - i_min)).
inline double fatigue_cost(const FatigueConfig& c, ActionKind kind, int interest) {
  if (interest < c.interest_min || interest > c.interest_max) {
    throw Error(ErrorKind::kInvalidArgument, "interest " + std::to_string(interest) + " outside [" +
                                                 std::to_string(c.interest_min) + "," + std::to_string(c.interest_max) + "]");
  }
  const double ca = c.base_cost.at(kind);
  const double span = static_cast<double>(c.interest_max - c.interest_min);
  return ca * (c.phi_max - static_cast<double>(interest - c.interest_min) * (c.phi_max - c.phi_min) / span);
}

struct FatigueState {
  double accumulated = 0.0;
  double budget = 30.0;

  bool exhausted() const { return accumulated >= budget; }

  std::string reading() const { return detail::fixed1(accumulated) + "/" + detail::format_number(budget); }
};

inline FatigueState apply_fatigue(FatigueState s, double cost) {
  if (!(cost >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "fatigue cost must be >= 0");
  s.accumulated += cost;
  return s;
}

/// Per-trait engagement knobs. The threshold offset is in interest units
/// and converts to score units by dividing by the interest span (4).
struct ActivityParams {
  double budget_multiplier = 1.0;
  double click_threshold_offset = 0.0;
};

inline ActivityParams activity_profile(ActivityTrait t) {
  switch (t) {
    case ActivityTrait::kLow: return {0.7, 0.5};
    case ActivityTrait::kMedium: return {1.0, 0.0};
    case ActivityTrait::kHigh: return {1.5, -0.5};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Policies

struct Decision {
  Action action;
  int interest = 1;
  std::string explanation;
};

struct DecisionContext {
  const Profile& profile;
  const Observation& observation;
  const ShortTermMemory& short_term;
  const std::vector<Retrieved>& retrieved;
  const FatigueState& fatigue;
  const ActionSet& legal;
  std::uint64_t seed = 0;  // per-session; identical across arms
};

enum class PolicyKind { kRule, kLlm };

inline const char* to_string(PolicyKind k) { return k == PolicyKind::kRule ? "rule" : "llm"; }

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  /// Always returns an action from ctx.legal, or throws.
  virtual Decision decide(const DecisionContext& ctx) const = 0;
};

struct RuleConfig {
  double w_genre = 0.5;
  double w_rating = 0.3;
  double w_poster = 0.2;
  double noise = 0.05;
  double click_threshold = 0.55;  // on the normalized score scale
  int watch_threshold = 4;        // interest

  json to_json() const {
    return {{"w_genre", w_genre}, {"w_rating", w_rating}, {"w_poster", w_poster},
            {"noise", noise},     {"click_threshold", click_threshold}, {"watch_threshold", watch_threshold}};
  }
  static RuleConfig from_json(const json& j) {
    RuleConfig c;
    c.w_genre = j.value("w_genre", c.w_genre);
    c.w_rating = j.value("w_rating", c.w_rating);
    c.w_poster = j.value("w_poster", c.w_poster);
    c.noise = j.value("noise", c.noise);
    c.click_threshold = j.value("click_threshold", c.click_threshold);
    c.watch_threshold = j.value("watch_threshold", c.watch_threshold);
    if (c.w_genre < 0 || c.w_rating < 0 || c.w_poster < 0 || c.w_genre + c.w_rating + c.w_poster <= 0) {
      throw Error(ErrorKind::kConfig, "rule weights must be non-negative with a positive sum");
    }
    return c;
  }
};

/// Transparent baseline: scores cards by genre overlap with the profile,
/// IMDb rating and poster similarity, each weight normalized by the active
/// weights' sum so the score stays in [0,1] before noise.
class RulePolicy final : public Policy {
 public:
  explicit RulePolicy(RuleConfig config = {}, const EmbeddingProvider* image = nullptr)
      : config_(config), image_(image) {}

  PolicyKind kind() const override { return PolicyKind::kRule; }
  const RuleConfig& config() const { return config_; }

  double score(const Profile& profile, MovieId movie, const std::vector<std::string>& genres,
               std::optional<double> imdb, const std::optional<std::string>& poster, std::uint64_t seed) const {
    const std::set<std::string> pg(profile.signals.top_genres.begin(), profile.signals.top_genres.end());
    const std::set<std::string> cg(genres.begin(), genres.end());
    std::size_t inter = 0;
    for (const auto& g : cg) inter += pg.count(g);
    const std::size_t uni = pg.size() + cg.size() - inter;
    const double jaccard = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    double num = config_.w_genre * jaccard + config_.w_rating * std::clamp(imdb.value_or(0.0) / 10.0, 0.0, 1.0);
    double den = config_.w_genre + config_.w_rating;
    if (image_ && poster && !poster->empty() && profile.signals.poster_style) {
      num += config_.w_poster * std::max(0.0, cosine(*profile.signals.poster_style, image_->embed(*poster)));
      den += config_.w_poster;
    }
    const double base = den > 0.0 ? num / den : 0.0;
    const double u = to_unit(derive_seed(seed, 0x6e6f697365ull, movie));
    return base + config_.noise * (2.0 * u - 1.0);
  }

  static int interest_of(double score) {
    return static_cast<int>(std::clamp<long>(1 + std::lround(4.0 * score), 1, 5));
  }

  Decision decide(const DecisionContext& ctx) const override {
    const double threshold =
        config_.click_threshold + activity_profile(ctx.profile.activity_trait).click_threshold_offset / 4.0;
    auto fallback = [&](int interest, std::string why) {
      return Decision{Action::exit(), interest, std::move(why)};
    };
    if (ctx.fatigue.exhausted() && ctx.legal.count(ActionKind::kExit)) {
      return {Action::exit(ExitReason::kFatigue), 1, "too tired to continue"};
    }

    if (const auto* d = std::get_if<DetailObservation>(&ctx.observation)) {
      const auto& m = d->movie;
      const int interest = interest_of(score(ctx.profile, m.movie_id, m.genres, m.imdb_rating, m.poster_ref, ctx.seed));
      if (interest >= config_.watch_threshold && ctx.legal.count(ActionKind::kWatchAndRate)) {
        return {Action::watch_and_rate(interest), interest, "matches my taste"};
      }
      if (ctx.legal.count(ActionKind::kBack)) {
        return {Action::back(), interest, d->watched ? "already watched" : "not interesting enough to watch"};
      }
      return fallback(interest, "nothing left to do here");
    }

    const auto& home = std::get<HomeObservation>(ctx.observation);
    std::set<MovieId> visited;
    for (const auto& e : ctx.short_term.entries()) {
      if (e.action_taken.kind == ActionKind::kClick) visited.insert(e.action_taken.movie);
    }
    std::optional<std::pair<double, MovieId>> best;
    for (const auto& c : home.cards) {
      if (visited.count(c.movie_id)) continue;
      const double s = score(ctx.profile, c.movie_id, c.genres, c.imdb_rating, c.poster_ref, ctx.seed);
      if (!best || s > best->first) best = std::pair(s, c.movie_id);
    }
    const int interest = best ? interest_of(best->first) : 1;
    if (best && best->first >= threshold && ctx.legal.count(ActionKind::kClick)) {
      return {Action::click(best->second), interest, "this one looks appealing"};
    }
    if (ctx.legal.count(ActionKind::kNextPage)) return {Action::next_page(), interest, "nothing here catches my eye"};
    return fallback(interest, "no more recommendations worth exploring");
  }

 private:
  RuleConfig config_;
  const EmbeddingProvider* image_;
};

/// LLM-backed policy. Replies must be one JSON object
/// {"action", "args", "interest", "reason"}; invalid replies are re-prompted
/// with the legal set up to `retries` times before falling back to Exit.
class LlmPolicy final : public Policy {
 public:
  LlmPolicy(TextGenerator& generator, PromptTemplates prompts = {}, int retries = 2, SamplingParams params = {})
      : generator_(&generator), prompts_(std::move(prompts)), retries_(retries), params_(params) {}

  PolicyKind kind() const override { return PolicyKind::kLlm; }

  std::vector<ChatMessage> initial_messages(const DecisionContext& ctx) const {
    std::string memories;
    for (const auto& r : ctx.retrieved) {
      memories += "- " + r.record->payload + " (similarity " + detail::fixed1(r.similarity * 100) + "%)\n";
    }
    if (memories.empty()) memories = "(no relevant past sessions)\n";
    memories += "This session so far:\n" + (ctx.short_term.empty() ? std::string("(nothing yet)") : ctx.short_term.transcript());
    const std::string user = templates::fill(
        prompts_.decision_user, {{"profile", ctx.profile.render()},
                                 {"memories", memories},
                                 {"fatigue", ctx.fatigue.reading() + (ctx.fatigue.exhausted() ? " (exhausted)" : "")},
                                 {"observation", render_text(ctx.observation)},
                                 {"legal_actions", describe(ctx.legal)}});
    return {{"system", prompts_.decision_system}, {"user", user}};
  }

  /// Parses and validates one reply. Returns the diagnostic on failure.
  std::variant<Decision, std::string> parse_reply(const std::string& reply, const DecisionContext& ctx) const {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::string("no JSON object found");
    json j;
    try {
      j = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::exception&) {
      return std::string("reply is not valid JSON");
    }
    if (!j.is_object() || !j.contains("action") || !j["action"].is_string()) return std::string("missing \"action\"");
    const auto kind = parse_action_kind(j["action"].get<std::string>());
    if (!kind) return "unknown action \"" + j["action"].get<std::string>() + "\"";
    if (!ctx.legal.count(*kind)) return std::string("illegal: ") + to_string(*kind) + " not in " + describe(ctx.legal);
    if (!j.contains("interest") || !j["interest"].is_number_integer()) return std::string("missing integer \"interest\"");
    const int interest = j["interest"].get<int>();
    if (interest < 1 || interest > 5) return std::string("interest must be in [1,5]");
    const json args = j.value("args", json::object());
    Decision d;
    d.interest = interest;
    d.explanation = j.value("reason", std::string());
    switch (*kind) {
      case ActionKind::kClick: {
        if (!args.is_object() || !args.contains("movie_id") || !args["movie_id"].is_number_integer()) {
          return std::string("Click needs args.movie_id");
        }
        const auto m = args["movie_id"].get<MovieId>();
        const auto* home = std::get_if<HomeObservation>(&ctx.observation);
        const bool visible = home && std::any_of(home->cards.begin(), home->cards.end(),
                                                 [&](const MovieCard& c) { return c.movie_id == m; });
        if (!visible) return "movie " + std::to_string(m) + " is not on this page";
        d.action = Action::click(m);
        break;
      }
      case ActionKind::kWatchAndRate: {
        int rating = interest;
        if (args.is_object() && args.contains("rating") && args["rating"].is_number()) {
          rating = static_cast<int>(std::lround(args["rating"].get<double>()));
        }
        if (rating < 1 || rating > 5) return std::string("rating must be in [1,5]");
        d.action = Action::watch_and_rate(rating);
        break;
      }
      case ActionKind::kNextPage: d.action = Action::next_page(); break;
      case ActionKind::kPrevPage: d.action = Action::prev_page(); break;
      case ActionKind::kBack: d.action = Action::back(); break;
      case ActionKind::kExit: d.action = Action::exit(); break;
    }
    return d;
  }

  Decision decide(const DecisionContext& ctx) const override {
    if (ctx.fatigue.exhausted() && ctx.legal.count(ActionKind::kExit)) {
      return {Action::exit(ExitReason::kFatigue), 1, "fatigue budget exhausted"};
    }
    auto messages = initial_messages(ctx);
    std::string diagnostic;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
      const auto reply = generator_->generate(messages, params_);
      auto parsed = parse_reply(reply, ctx);
      if (auto* d = std::get_if<Decision>(&parsed)) return *d;
      diagnostic = std::get<std::string>(parsed);
      messages.push_back({"assistant", reply});
      messages.push_back({"user", "Your reply was rejected: " + diagnostic + ". Legal actions: " + describe(ctx.legal) +
                                      ". Answer again with a single JSON object."});
    }
    return {Action::exit(), 1, "fallback exit after " + std::to_string(retries_ + 1) + " invalid replies: " + diagnostic};
  }

 private:
  TextGenerator* generator_;
  PromptTemplates prompts_;
  int retries_;
  SamplingParams params_;
};

// ---------------------------------------------------------------------------
// Session loop

struct MemoryProviders {
  const EmbeddingProvider* text = nullptr;
  const EmbeddingProvider* image = nullptr;
  std::size_t top_k = 5;
};

struct SessionSpec {
  std::string session_id;
  std::string arm_id;
  RankedList ranked;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> start_time;  // defaults to the sandbox's
};

struct SessionOutcome {
  SessionState state;
  FatigueState fatigue;
  ShortTermMemory short_term;
  std::vector<Decision> decisions;
  std::vector<MemoryRecord> consolidated;

  const std::vector<Event>& events() const { return state.events; }
};

/// Runs one session to termination. Before each decision the current page
/// is embedded as a text query (and its posters as an image query when
/// vision is on) against `memory`; at the end the session's clicks and
/// watches are appended to `memory`.
inline SessionOutcome run_session(const Profile& profile, const Policy& policy, const Sandbox& sandbox,
                                  LongTermMemory& memory, const FatigueConfig& fatigue_config, SessionSpec spec,
                                  const MemoryProviders& providers = {}) {
  fatigue_config.validate();
  SessionOutcome out;
  out.fatigue.budget = fatigue_config.budget * activity_profile(profile.activity_trait).budget_multiplier;
  auto [state, obs] = sandbox.start_session(spec.session_id, profile.user_id, spec.arm_id, std::move(spec.ranked),
                                            spec.start_time);
  const bool vision = sandbox.config().vision_enabled;
  auto context = [&](const std::string& what) {
    return "session " + state.session_id + " (user " + std::to_string(profile.user_id) + ", step " +
           std::to_string(state.step_count) + "): " + what;
  };

  while (!state.terminated) {
    if (out.fatigue.exhausted()) {
      sandbox.step(state, Action::exit(ExitReason::kFatigue));
      break;
    }
    std::vector<Retrieved> retrieved;
    if (providers.text && !memory.records().empty()) {
      if (auto q = make_query(obs, Modality::kText, *providers.text, providers.top_k)) retrieved = memory.retrieve(*q);
      if (vision && providers.image) {
        if (auto q = make_query(obs, Modality::kImage, *providers.image, providers.top_k)) {
          auto hits = memory.retrieve(*q);
          retrieved.insert(retrieved.end(), hits.begin(), hits.end());
        }
      }
    }
    const auto legal = sandbox.legal_actions(state);
    const DecisionContext ctx{profile, obs, out.short_term, retrieved, out.fatigue, legal, spec.seed};
    Decision d;
    try {
      d = policy.decide(ctx);
    } catch (const Error& e) {
      throw Error(e.kind(), context(e.what()));
    }
    if (auto why = sandbox.check(state, d.action); !why.empty()) {
      throw Error(ErrorKind::kInternal, context("policy returned " + d.action.describe() + ": " + why));
    }
    out.fatigue = apply_fatigue(out.fatigue, fatigue_cost(fatigue_config, d.action.kind, d.interest));

    ShortTermEntry entry;
    entry.interface_type = state.page == Page::kHome ? InterfaceType::kHome : InterfaceType::kDetail;
    entry.observation_summary = render_text(obs);
    entry.interest = d.interest;
    entry.action_taken = d.action;
    if (d.action.kind == ActionKind::kClick) {
      entry.movie_id = d.action.movie;
    } else if (state.page == Page::kDetail) {
      entry.movie_id = state.detail_movie;
    }
    auto result = sandbox.step(state, d.action);
    entry.step = state.step_count;
    out.short_term.append(std::move(entry));
    out.decisions.push_back(std::move(d));
    obs = std::move(result.observation);
  }

  if (providers.text) {
    ConsolidationContext cc{&sandbox.catalog(), providers.text, providers.image, vision, profile.user_id,
                            state.session_id,  state.config.start_time};
    out.consolidated = consolidate(out.short_term, cc);
    for (const auto& r : out.consolidated) memory.add(r);
  }
  out.state = std::move(state);
  return out;
}

}  // namespace absim
