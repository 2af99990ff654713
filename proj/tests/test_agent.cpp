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

#include <deque>
#include <numeric>

#include "../acceptance/oracles.hpp"
#include "absim/agent.hpp"
#include "testing.hpp"

namespace absim {
namespace {

using testing::tiny_catalog;

// ---------------------------------------------------------------------------
// Fatigue

TEST(Fatigue, PresetColumns) {
  const auto mini = FatigueConfig::preset("mini-column");
  EXPECT_EQ(mini.budget, 30.0);
  EXPECT_EQ(mini.base_cost.at(ActionKind::kClick), 2.0);
  EXPECT_EQ(mini.base_cost.at(ActionKind::kWatchAndRate), 10.0);
  EXPECT_EQ(mini.base_cost.at(ActionKind::kBack), 5.0);
  EXPECT_EQ(mini.base_cost.at(ActionKind::kExit), 0.0);
  const auto big = FatigueConfig::preset("4o-column");
  EXPECT_EQ(big.base_cost.at(ActionKind::kClick), 15.0);
  EXPECT_EQ(big.base_cost.at(ActionKind::kWatchAndRate), 40.0);
  EXPECT_EQ(big.base_cost.at(ActionKind::kBack), 2.0);
  EXPECT_EQ(FatigueConfig::preset("mini-column-modulated").phi_min, 0.5);
  EXPECT_THROW(FatigueConfig::preset("nope"), Error);
}

TEST(Fatigue, CaseTraceArithmetic) {
  const FatigueConfig c;
  auto s = FatigueState{0.0, 30.0};
  s = apply_fatigue(s, fatigue_cost(c, ActionKind::kClick, 3));
  EXPECT_EQ(s.reading(), "2.0/30");

  s = FatigueState{9.5, 30.0};
  s = apply_fatigue(s, fatigue_cost(c, ActionKind::kWatchAndRate, 5));
  EXPECT_EQ(s.reading(), "19.5/30");
  EXPECT_FALSE(s.exhausted());

  s = apply_fatigue(FatigueState{25.4, 30.0}, 4.6);
  EXPECT_NEAR(s.accumulated, 30.0, 1e-9);
  EXPECT_EQ(s.reading(), "30.0/30");
  EXPECT_TRUE(s.exhausted());
}

TEST(Fatigue, ModulatedSubstitution) {
  FatigueConfig c;
  c.phi_min = 0.5;
  EXPECT_DOUBLE_EQ(fatigue_cost(c, ActionKind::kWatchAndRate, 3), 7.5);
  EXPECT_DOUBLE_EQ(fatigue_cost(c, ActionKind::kWatchAndRate, 5), 5.0);
  EXPECT_DOUBLE_EQ(fatigue_cost(c, ActionKind::kWatchAndRate, 1), 10.0);
}

TEST(Fatigue, RejectsOutOfRangeInterestAndNegativeCost) {
  const FatigueConfig c;
  for (int bad : {0, 6, -3}) {
    try {
      fatigue_cost(c, ActionKind::kClick, bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
  }
  EXPECT_THROW(apply_fatigue({}, -0.1), Error);
  const auto z = apply_fatigue({}, 0.0);
  EXPECT_FALSE(z.exhausted());
}

TEST(Fatigue, ExhaustedAtFirstCrossingNeverBefore) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> costs;
    for (int i = 0; i < 20; ++i) costs.push_back(static_cast<double>(rng.below(11)));
    FatigueState s{0.0, 30.0};
    double prefix = 0.0;
    for (double c : costs) {
      s = apply_fatigue(s, c);
      prefix += c;
      EXPECT_EQ(s.exhausted(), prefix >= 30.0) << "trial " << trial;
    }
  }
}

TEST(Fatigue, CostBoundedAndMonotoneInInterest) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    FatigueConfig c;
    c.phi_min = 0.1 + rng.uniform() * 0.9;
    c.phi_max = c.phi_min + (trial % 3 == 0 ? 0.0 : rng.uniform() * 2.0);
    c.interest_min = static_cast<int>(rng.below(3));
    c.interest_max = c.interest_min + 1 + static_cast<int>(rng.below(6));
    const auto kind = kAllActionKinds[rng.below(kAllActionKinds.size())];
    c.base_cost[kind] = rng.uniform() * 20.0;
    const double ca = c.base_cost.at(kind);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = c.interest_min; i <= c.interest_max; ++i) {
      const double f = fatigue_cost(c, kind, i);
      EXPECT_GE(f, ca * c.phi_min - 1e-9);
      EXPECT_LE(f, ca * c.phi_max + 1e-9);
      EXPECT_LE(f, prev + 1e-12);
      if (c.phi_max == c.phi_min) {
        EXPECT_DOUBLE_EQ(f, ca * c.phi_max);
      }
      prev = f;
    }
    EXPECT_NEAR(fatigue_cost(c, kind, c.interest_min), ca * c.phi_max, 1e-9);
    EXPECT_NEAR(fatigue_cost(c, kind, c.interest_max), ca * c.phi_min, 1e-9);
  }
}

TEST(Fatigue, ConfigJsonRoundTripAndValidation) {
  auto c = FatigueConfig::preset("4o-column");
  c.budget = 12.5;
  const auto back = FatigueConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(FatigueConfig::from_json({{"preset", "mini-column-modulated"}, {"budget", 45}}).budget, 45.0);
  EXPECT_THROW(FatigueConfig::from_json({{"budget", -1}}), Error);
  EXPECT_THROW(FatigueConfig::from_json({{"phi_min", 2.0}}), Error);
  EXPECT_THROW(FatigueConfig::from_json({{"base_cost", {{"Teleport", 1}}}}), Error);
  FatigueConfig missing;
  missing.base_cost.erase(ActionKind::kBack);
  EXPECT_THROW(missing.validate(), Error);
}

TEST(Activity, TraitParameters) {
  const auto lo = activity_profile(ActivityTrait::kLow);
  const auto mid = activity_profile(ActivityTrait::kMedium);
  const auto hi = activity_profile(ActivityTrait::kHigh);
  EXPECT_EQ(mid.budget_multiplier, 1.0);
  EXPECT_EQ(mid.click_threshold_offset, 0.0);
  EXPECT_LT(lo.budget_multiplier, mid.budget_multiplier);
  EXPECT_LT(mid.budget_multiplier, hi.budget_multiplier);
  EXPECT_GT(lo.click_threshold_offset, 0.0);
  EXPECT_LT(hi.click_threshold_offset, 0.0);
}

// ---------------------------------------------------------------------------
// Templates and preference summaries

TEST(Templates, ShippedFilesMatchBuiltins) {
  const auto dir = std::filesystem::path(ABSIM_SOURCE_DIR) / "templates";
  const auto t = PromptTemplates::from_directory(dir);
  EXPECT_EQ(t.preference, templates::kPreferenceV1);
  EXPECT_EQ(t.decision_system, templates::kDecisionSystemV1);
  EXPECT_EQ(t.decision_user, templates::kDecisionUserV1);
  try {
    PromptTemplates::from_directory(dir / "absent");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
  }
}

TEST(Templates, FillReplacesKnownPlaceholders) {
  EXPECT_EQ(templates::fill("a {x} b {y}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
  // Braces that are not placeholders survive, which the JSON examples need.
  EXPECT_EQ(templates::fill("{\"action\": 1} {x}", {{"x", "v"}}), "{\"action\": 1} v");
}

History toy_history() {
  History h;
  for (int i = 0; i < 6; ++i) {
    Movie m;
    m.movie_id = i + 1;
    m.title = "Film " + std::to_string(i + 1) + " (199" + std::to_string(i) + ")";
    m.genres = {i < 5 ? "Comedy" : "Drama"};
    Interaction it{1, m.movie_id, i < 5 ? 5 : 2, 1000 + i};
    h.emplace_back(it, m);
  }
  return h;
}

TEST(Preference, EmptyHistoryIsAllNotFound) {
  const auto p = fallback_preference_summary({});
  for (const auto& s : p.sections) EXPECT_EQ(s, kNotFound);
  EXPECT_FALSE(p.generated);
}

TEST(Preference, FallbackLeadsWithHeavilyRatedGenre) {
  const auto h = toy_history();
  const auto p = fallback_preference_summary(h);
  EXPECT_EQ(p.sections[0].rfind("I prefer Comedy", 0), 0u) << p.sections[0];
  const auto& rating = p.sections[4];
  const auto comedy = rating.find("Comedy 5.0");
  const auto drama = rating.find("Drama 2.0");
  ASSERT_NE(comedy, std::string::npos) << rating;
  ASSERT_NE(drama, std::string::npos) << rating;
  EXPECT_LT(comedy, drama);
  EXPECT_NE(p.sections[3], kNotFound);
  EXPECT_EQ(p.sections[5], kNotFound);
  EXPECT_EQ(fallback_preference_summary(h).render(), p.render());
}

TEST(Preference, ParseRecoversSectionsAndRejectsGaps) {
  const std::string text =
      "**Genres**: comedies\n## Directors - not found\nActors: A, B\n"
      "Release Date Patterns: 1990s\n4. Rating Tendencies: generous\nPoster Style Preference: warm";
  const auto p = PreferenceSummary::parse(text);
  EXPECT_TRUE(p.generated);
  EXPECT_EQ(p.sections[0], "comedies");
  EXPECT_EQ(p.sections[1], "not found");
  EXPECT_EQ(p.sections[2], "A, B");
  EXPECT_EQ(p.sections[5], "warm");
  EXPECT_EQ(PreferenceSummary::parse(p.render()).sections, p.sections);
  try {
    PreferenceSummary::parse("Genres: x\nActors: y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

struct ScriptedGenerator : TextGenerator {
  std::deque<std::string> replies;
  std::vector<std::vector<ChatMessage>> calls;
  bool fail = false;

  std::string generate(const std::vector<ChatMessage>& messages, const SamplingParams&) override {
    calls.push_back(messages);
    if (fail) throw Error(ErrorKind::kTransport, "connection refused");
    if (replies.empty()) return "{}";
    auto r = replies.front();
    replies.pop_front();
    return r;
  }
};

TEST(Preference, GeneratorPathAndFallbackOnFailure) {
  ScriptedGenerator gen;
  gen.replies.push_back(PreferenceSummary{{"g", "d", "a", "r", "t", "p"}, true}.render());
  auto r = build_preference_summary(toy_history(), &gen);
  EXPECT_TRUE(r.summary.generated);
  EXPECT_EQ(r.summary.sections[0], "g");
  ASSERT_EQ(gen.calls.size(), 1u);
  EXPECT_NE(gen.calls[0][0].content.find("Film 1 (1990) | Comedy | rated 5"), std::string::npos);

  gen.replies.push_back("I like movies.");
  r = build_preference_summary(toy_history(), &gen);
  EXPECT_FALSE(r.summary.generated);
  ASSERT_EQ(r.warnings.size(), 1u);

  gen.fail = true;
  r = build_preference_summary(toy_history(), &gen);
  EXPECT_FALSE(r.summary.generated);
  EXPECT_NE(r.warnings.at(0).find("connection refused"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Rule policy

class PolicyTest : public ::testing::Test {
 protected:
  PolicyTest() : catalog_(tiny_catalog(2, 30)) {
    profile_.user_id = 1;
    profile_.signals.top_genres = {"Drama"};
  }

  Decision decide(const Policy& p, const Observation& obs, const ActionSet& legal, FatigueState f = {}) const {
    const DecisionContext ctx{profile_, obs, stm_, retrieved_, f, legal, 42};
    return p.decide(ctx);
  }

  static MovieCard card(MovieId id, std::vector<std::string> genres, double imdb) {
    MovieCard c;
    c.movie_id = id;
    c.title = "M" + std::to_string(id);
    c.genres = std::move(genres);
    c.imdb_rating = imdb;
    return c;
  }

  Catalog catalog_;
  Profile profile_;
  ShortTermMemory stm_;
  std::vector<Retrieved> retrieved_;
  const ActionSet home_legal_{ActionKind::kClick, ActionKind::kNextPage, ActionKind::kExit};
  const ActionSet detail_legal_{ActionKind::kWatchAndRate, ActionKind::kBack, ActionKind::kExit};
};

TEST_F(PolicyTest, ScoreOracleWithoutNoise) {
  RuleConfig cfg;
  cfg.noise = 0.0;
  const RulePolicy p(cfg);
  profile_.signals.top_genres = {"Drama", "Comedy", "Horror"};
  // Jaccard({D,C,H},{D,A}) = 1/4; no image provider so the poster weight drops.
  const double expect = (0.5 * 0.25 + 0.3 * 0.8) / 0.8;
  EXPECT_NEAR(p.score(profile_, 5, {"Drama", "Action"}, 8.0, std::string("x"), 1), expect, 1e-12);
  EXPECT_EQ(RulePolicy::interest_of(expect), 1 + static_cast<int>(std::lround(4 * expect)));
  EXPECT_EQ(RulePolicy::interest_of(-1.0), 1);
  EXPECT_EQ(RulePolicy::interest_of(2.0), 5);
}

TEST_F(PolicyTest, NoiseIsBoundedAndSeeded) {
  const RulePolicy noisy;
  RuleConfig quiet_cfg;
  quiet_cfg.noise = 0.0;
  const RulePolicy quiet(quiet_cfg);
  for (MovieId m = 1; m <= 200; ++m) {
    const double base = quiet.score(profile_, m, {"Drama"}, 7.0, std::nullopt, 3);
    const double s = noisy.score(profile_, m, {"Drama"}, 7.0, std::nullopt, 3);
    EXPECT_LE(std::abs(s - base), 0.05 + 1e-12);
    EXPECT_EQ(s, noisy.score(profile_, m, {"Drama"}, 7.0, std::nullopt, 3));
  }
}

TEST_F(PolicyTest, DetailWithTopInterestWatchesAndRatesFive) {
  const RulePolicy p;
  Movie m = catalog_.movie(2);  // Drama only
  m.imdb_rating = 10.0;
  const Observation obs = DetailObservation{m, false};
  const auto d = decide(p, obs, detail_legal_);
  EXPECT_EQ(d.interest, 5);
  EXPECT_EQ(d.action.kind, ActionKind::kWatchAndRate);
  EXPECT_EQ(d.action.rating, 5);
}

TEST_F(PolicyTest, DetailBelowWatchThresholdGoesBack) {
  const RulePolicy p;
  Movie m = catalog_.movie(1);  // Comedy
  m.genres = {"Horror"};
  m.imdb_rating = 2.0;
  const Observation obs = DetailObservation{m, false};
  const auto d = decide(p, obs, detail_legal_);
  EXPECT_LT(d.interest, 4);
  EXPECT_EQ(d.action.kind, ActionKind::kBack);
}

TEST_F(PolicyTest, AllCardsBelowThresholdPagesForward) {
  const RulePolicy p;
  HomeObservation home;
  for (MovieId i = 1; i <= 5; ++i) home.cards.push_back(card(i, {"Horror"}, 5.0));
  const auto d = decide(p, Observation{home}, home_legal_);
  EXPECT_EQ(d.action.kind, ActionKind::kNextPage);

  const ActionSet last_page{ActionKind::kClick, ActionKind::kPrevPage, ActionKind::kExit};
  EXPECT_EQ(decide(p, Observation{home}, last_page).action.kind, ActionKind::kExit);
}

TEST_F(PolicyTest, ClicksBestCardAboveThreshold) {
  const RulePolicy p;
  HomeObservation home;
  home.cards = {card(1, {"Horror"}, 5.0), card(2, {"Drama"}, 9.5), card(3, {"Comedy"}, 6.0)};
  const auto d = decide(p, Observation{home}, home_legal_);
  ASSERT_EQ(d.action.kind, ActionKind::kClick);
  EXPECT_EQ(d.action.movie, 2);

  // Once visited, the same card is skipped.
  ShortTermEntry e;
  e.step = 1;
  e.interest = 5;
  e.action_taken = Action::click(2);
  stm_.append(e);
  EXPECT_NE(decide(p, Observation{home}, home_legal_).action.movie, 2);
}

TEST_F(PolicyTest, ExhaustedExitsRegardlessOfScores) {
  const RulePolicy p;
  HomeObservation home;
  for (MovieId i = 1; i <= 5; ++i) home.cards.push_back(card(i, {"Drama"}, 10.0));
  const auto d = decide(p, Observation{home}, home_legal_, FatigueState{30.0, 30.0});
  EXPECT_EQ(d.action.kind, ActionKind::kExit);
  EXPECT_EQ(d.action.exit_reason, ExitReason::kFatigue);
}

TEST_F(PolicyTest, TraitShiftsClickThresholdByQuarterOfOffset) {
  RuleConfig cfg;
  cfg.noise = 0.0;
  const RulePolicy p(cfg);
  // Score exactly 0.5: below medium's 0.55, above high's 0.425, below low's 0.675.
  profile_.signals.top_genres = {"Drama", "Comedy"};
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 10.0 * (0.5 * 0.8 - 0.25) / 0.3)};
  ASSERT_NEAR(p.score(profile_, 1, home.cards[0].genres, home.cards[0].imdb_rating, std::nullopt, 42), 0.5, 1e-12);
  profile_.activity_trait = ActivityTrait::kMedium;
  EXPECT_EQ(decide(p, Observation{home}, home_legal_).action.kind, ActionKind::kNextPage);
  profile_.activity_trait = ActivityTrait::kHigh;
  EXPECT_EQ(decide(p, Observation{home}, home_legal_).action.kind, ActionKind::kClick);
  profile_.activity_trait = ActivityTrait::kLow;
  EXPECT_EQ(decide(p, Observation{home}, home_legal_).action.kind, ActionKind::kNextPage);
}

TEST_F(PolicyTest, ScalingAllWeightsLeavesDecisionsUnchanged) {
  RuleConfig a;
  RuleConfig b;
  b.w_genre *= 3.7;
  b.w_rating *= 3.7;
  b.w_poster *= 3.7;
  const RulePolicy pa(a), pb(b);
  Rng rng(5);
  const std::array<const char*, 4> genres = {"Drama", "Comedy", "Horror", "Action"};
  for (int trial = 0; trial < 100; ++trial) {
    HomeObservation home;
    for (MovieId i = 1; i <= 5; ++i) {
      home.cards.push_back(card(static_cast<MovieId>(trial * 5) + i, {genres[rng.below(4)]}, rng.uniform() * 10));
    }
    const auto da = decide(pa, Observation{home}, home_legal_);
    const auto db = decide(pb, Observation{home}, home_legal_);
    EXPECT_EQ(da.action, db.action);
    EXPECT_EQ(da.interest, db.interest);
  }
}

TEST(RuleConfigJson, ValidatesWeights) {
  EXPECT_EQ(RuleConfig::from_json(RuleConfig{}.to_json()).to_json(), RuleConfig{}.to_json());
  EXPECT_THROW(RuleConfig::from_json({{"w_genre", -1}}), Error);
  EXPECT_THROW(RuleConfig::from_json({{"w_genre", 0}, {"w_rating", 0}, {"w_poster", 0}}), Error);
}

// ---------------------------------------------------------------------------
// LLM policy against a scripted generator

TEST_F(PolicyTest, LlmParseDiagnostics) {
  ScriptedGenerator gen;
  const LlmPolicy p(gen);
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 7.0), card(2, {"Comedy"}, 7.0)};
  const Observation obs = home;
  FatigueState f;
  const DecisionContext ctx{profile_, obs, stm_, retrieved_, f, home_legal_, 1};
  auto diag = [&](const std::string& reply) {
    auto r = p.parse_reply(reply, ctx);
    return std::holds_alternative<std::string>(r) ? std::get<std::string>(r) : std::string("ok");
  };
  EXPECT_EQ(diag("I would click"), "no JSON object found");
  EXPECT_EQ(diag("{action: Click}"), "reply is not valid JSON");
  EXPECT_EQ(diag(R"({"interest": 3})"), "missing \"action\"");
  EXPECT_EQ(diag(R"({"action": "Dance", "interest": 3})"), "unknown action \"Dance\"");
  EXPECT_EQ(diag(R"({"action": "PrevPage", "interest": 3})"), "illegal: PrevPage not in {Click, NextPage, Exit}");
  EXPECT_EQ(diag(R"({"action": "NextPage"})"), "missing integer \"interest\"");
  EXPECT_EQ(diag(R"({"action": "NextPage", "interest": 9})"), "interest must be in [1,5]");
  EXPECT_EQ(diag(R"({"action": "Click", "interest": 3})"), "Click needs args.movie_id");
  EXPECT_EQ(diag(R"({"action": "Click", "args": {"movie_id": 7}, "interest": 3})"), "movie 7 is not on this page");
  EXPECT_EQ(diag(R"(Sure! {"action": "Click", "args": {"movie_id": 2}, "interest": 4, "reason": "fun"})"), "ok");

  const auto d = std::get<Decision>(p.parse_reply(R"({"action": "Click", "args": {"movie_id": 2}, "interest": 4})", ctx));
  EXPECT_EQ(d.action, Action::click(2));
  EXPECT_EQ(d.interest, 4);
}

TEST_F(PolicyTest, LlmWatchRatingDefaultsToInterest) {
  ScriptedGenerator gen;
  const LlmPolicy p(gen);
  const Observation obs = DetailObservation{catalog_.movie(2), false};
  FatigueState f;
  const DecisionContext ctx{profile_, obs, stm_, retrieved_, f, detail_legal_, 1};
  auto d = std::get<Decision>(p.parse_reply(R"({"action": "WatchAndRate", "interest": 4})", ctx));
  EXPECT_EQ(d.action.rating, 4);
  d = std::get<Decision>(p.parse_reply(R"({"action": "WatchAndRate", "args": {"rating": 2}, "interest": 4})", ctx));
  EXPECT_EQ(d.action.rating, 2);
  EXPECT_EQ(std::get<std::string>(p.parse_reply(R"({"action": "WatchAndRate", "args": {"rating": 8}, "interest": 4})", ctx)),
            "rating must be in [1,5]");
}

TEST_F(PolicyTest, LlmIllegalReplyIsRepromptedWithLegalSet) {
  ScriptedGenerator gen;
  gen.replies = {R"({"action": "PrevPage", "interest": 2, "reason": "go back"})",
                 R"({"action": "NextPage", "interest": 2, "reason": "meh"})"};
  const LlmPolicy p(gen);
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 7.0)};
  const auto d = decide(p, Observation{home}, home_legal_);
  EXPECT_EQ(d.action.kind, ActionKind::kNextPage);
  EXPECT_EQ(d.explanation, "meh");
  ASSERT_EQ(gen.calls.size(), 2u);
  const auto& second = gen.calls[1];
  ASSERT_EQ(second.size(), 4u);
  EXPECT_EQ(second[2].role, "assistant");
  EXPECT_EQ(second[3].content,
            "Your reply was rejected: illegal: PrevPage not in {Click, NextPage, Exit}. Legal actions: "
            "{Click, NextPage, Exit}. Answer again with a single JSON object.");
}

TEST_F(PolicyTest, LlmFallsBackToExitAfterRetries) {
  ScriptedGenerator gen;
  gen.replies = {"no", "still no", "never"};
  const LlmPolicy p(gen, {}, 2);
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 7.0)};
  const auto d = decide(p, Observation{home}, home_legal_);
  EXPECT_EQ(d.action.kind, ActionKind::kExit);
  EXPECT_EQ(gen.calls.size(), 3u);
  EXPECT_NE(d.explanation.find("no JSON object found"), std::string::npos);
}

TEST_F(PolicyTest, LlmPromptCarriesContext) {
  ScriptedGenerator gen;
  const LlmPolicy p(gen);
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 7.0)};
  const Observation obs = home;
  const FatigueState f{12.0, 30.0};
  const DecisionContext ctx{profile_, obs, stm_, retrieved_, f, home_legal_, 1};
  const auto msgs = p.initial_messages(ctx);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].content, templates::kDecisionSystemV1);
  EXPECT_NE(msgs[1].content.find("12.0/30"), std::string::npos);
  EXPECT_NE(msgs[1].content.find("{Click, NextPage, Exit}"), std::string::npos);
  EXPECT_NE(msgs[1].content.find("(no relevant past sessions)"), std::string::npos);
}

TEST_F(PolicyTest, LlmTransportErrorPropagates) {
  ScriptedGenerator gen;
  gen.fail = true;
  const LlmPolicy p(gen);
  HomeObservation home;
  home.cards = {card(1, {"Drama"}, 7.0)};
  try {
    decide(p, Observation{home}, home_legal_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
}

// ---------------------------------------------------------------------------
// Session loop

class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<Action> script) : script_(std::move(script)) {}
  PolicyKind kind() const override { return PolicyKind::kRule; }
  Decision decide(const DecisionContext&) const override {
    if (next_ >= script_.size()) return {Action::exit(), 3, "script done"};
    return {script_[next_++], 3, "scripted"};
  }

 private:
  std::vector<Action> script_;
  mutable std::size_t next_ = 0;
};

class SessionTest : public ::testing::Test {
 protected:
  SessionTest() : catalog_(tiny_catalog(2, 30)), sandbox_(catalog_, SandboxConfig{}) {
    profile_.user_id = 1;
    profile_.signals.top_genres = {"Drama", "Action"};
  }

  SessionSpec spec(std::string id = "s1", std::uint64_t seed = 9) const {
    SessionSpec s;
    s.session_id = std::move(id);
    s.arm_id = "arm";
    s.seed = seed;
    s.ranked.user_id = 1;
    s.ranked.items.resize(20);
    std::iota(s.ranked.items.begin(), s.ranked.items.end(), 1);
    return s;
  }

  Catalog catalog_;
  Sandbox sandbox_;
  Profile profile_;
  DeterministicEmbedder text_{32};
  DeterministicEmbedder image_{32};
};

TEST_F(SessionTest, ScriptedSpendOfExactlyBudgetForcesFatigueExit) {
  const ScriptedPolicy p({Action::click(1), Action::watch_and_rate(4), Action::back(), Action::click(2), Action::back(),
                          Action::next_page(), Action::next_page(), Action::prev_page()});
  LongTermMemory mem(1);
  const auto out = run_session(profile_, p, sandbox_, mem, FatigueConfig{}, spec());
  EXPECT_DOUBLE_EQ(out.fatigue.accumulated, 30.0);
  EXPECT_TRUE(out.fatigue.exhausted());
  EXPECT_EQ(out.decisions.size(), 8u);
  ASSERT_TRUE(out.state.terminated);
  EXPECT_EQ(*out.state.terminated, TerminationReason::kFatigueExhausted);
  EXPECT_EQ(out.events().back().kind, EventKind::kExit);
  EXPECT_TRUE(oracle::session_violations(out.events()).empty());
}

TEST_F(SessionTest, ZeroBudgetIsImpressionThenExit) {
  FatigueConfig c;
  c.budget = 0.0;
  LongTermMemory mem(1);
  const auto out = run_session(profile_, RulePolicy{}, sandbox_, mem, c, spec());
  ASSERT_EQ(out.events().size(), 2u);
  EXPECT_EQ(out.events()[0].kind, EventKind::kImpression);
  EXPECT_EQ(out.events()[1].kind, EventKind::kExit);
  EXPECT_TRUE(out.decisions.empty());
}

TEST_F(SessionTest, TraitScalesBudget) {
  LongTermMemory mem(1);
  profile_.activity_trait = ActivityTrait::kLow;
  EXPECT_DOUBLE_EQ(run_session(profile_, RulePolicy{}, sandbox_, mem, FatigueConfig{}, spec()).fatigue.budget, 21.0);
  profile_.activity_trait = ActivityTrait::kHigh;
  EXPECT_DOUBLE_EQ(run_session(profile_, RulePolicy{}, sandbox_, mem, FatigueConfig{}, spec()).fatigue.budget, 45.0);
}

TEST_F(SessionTest, DeterministicForSameInputs) {
  const MemoryProviders providers{&text_, &image_, 5};
  LongTermMemory m1(1), m2(1);
  const auto a = run_session(profile_, RulePolicy({}, &image_), sandbox_, m1, FatigueConfig{}, spec(), providers);
  const auto b = run_session(profile_, RulePolicy({}, &image_), sandbox_, m2, FatigueConfig{}, spec(), providers);
  EXPECT_EQ(a.events(), b.events());
  EXPECT_EQ(m1.records().size(), m2.records().size());
}

TEST_F(SessionTest, ConsolidatesIntoLongTermMemory) {
  const ScriptedPolicy p({Action::click(3), Action::watch_and_rate(5), Action::back(), Action::exit()});
  LongTermMemory mem(1);
  const MemoryProviders providers{&text_, &image_, 5};
  const auto out = run_session(profile_, p, sandbox_, mem, FatigueConfig{}, spec(), providers);
  EXPECT_EQ(out.consolidated.size(), mem.records().size());
  EXPECT_FALSE(mem.records().empty());
  for (const auto& r : mem.records()) EXPECT_EQ(r.session_id, "s1");
  EXPECT_EQ(out.short_term.entries().size(), 4u);
  EXPECT_EQ(out.short_term.entries()[1].movie_id, 3);
}

TEST_F(SessionTest, IllegalPolicyActionIsInternalError) {
  const ScriptedPolicy p({Action::prev_page()});
  LongTermMemory mem(1);
  try {
    run_session(profile_, p, sandbox_, mem, FatigueConfig{}, spec());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInternal);
    EXPECT_NE(std::string(e.what()).find("session s1"), std::string::npos);
  }
}

TEST_F(SessionTest, FuzzedRuleSessionsStayLegalAndBounded) {
  Rng rng(3);
  const MemoryProviders providers{&text_, &image_, 3};
  std::size_t navs = 0, clicks = 0, watches = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Profile prof = profile_;
    const std::array<const char*, 4> genres = {"Drama", "Comedy", "Horror", "Action"};
    prof.signals.top_genres = {genres[rng.below(4)]};
    prof.activity_trait = static_cast<ActivityTrait>(rng.below(3));
    auto s = spec("f" + std::to_string(trial), rng.next_u64());
    std::shuffle(s.ranked.items.begin(), s.ranked.items.end(), std::mt19937_64(rng.next_u64()));
    LongTermMemory mem(1);
    const auto out = run_session(prof, RulePolicy({}, &image_), sandbox_, mem, FatigueConfig{}, s, providers);
    EXPECT_TRUE(oracle::session_violations(out.events()).empty()) << trial;
    // Costs are at least 2 for every non-exit action, so a 45 budget bounds
    // the session at 23 such actions plus the exit.
    EXPECT_LE(out.decisions.size(), 24u);
    for (const auto& e : out.events()) {
      navs += e.kind == EventKind::kNavNext || e.kind == EventKind::kNavPrev || e.kind == EventKind::kNavBack;
      clicks += e.kind == EventKind::kClick;
      watches += e.kind == EventKind::kWatch;
    }
  }
  EXPECT_GE(navs, clicks);
  EXPECT_GE(clicks, watches);
}

TEST_F(SessionTest, AffinityListDrawsMoreClicksThanAntiAffinityList) {
  profile_.signals.top_genres = {"Drama"};
  auto liked = spec("liked");
  auto disliked = spec("disliked");
  liked.ranked.items.clear();
  disliked.ranked.items.clear();
  for (MovieId m = 1; m <= 30; ++m) {
    const auto& g = catalog_.movie(m).genres;
    const bool drama = std::find(g.begin(), g.end(), "Drama") != g.end();
    (drama ? liked : disliked).ranked.items.push_back(m);
  }
  LongTermMemory mem(1);
  auto clicks = [&](SessionSpec s) {
    const auto out = run_session(profile_, RulePolicy{}, sandbox_, mem, FatigueConfig{}, std::move(s));
    return std::count_if(out.events().begin(), out.events().end(),
                         [](const Event& e) { return e.kind == EventKind::kClick; });
  };
  EXPECT_GT(clicks(liked), clicks(disliked));
}

}  // namespace
}  // namespace absim
