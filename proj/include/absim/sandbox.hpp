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

// Two-page recommendation UI: paged home feed over a top-K list and a
// movie detail page. Every transition is logged as an append-only event
// stream that can be replayed to reconstruct the session.

#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "absim/catalog.hpp"
#include "absim/common.hpp"
#include "absim/recsys.hpp"

namespace absim {

struct SandboxConfig {
  std::size_t k = 20;
  std::size_t page_size = 5;
  std::size_t step_cap = 100;
  bool vision_enabled = true;
  /// Returning to a home page logs a fresh impression for its cards.
  bool recount_impressions_on_back = true;
  /// Event timestamps are start_time + step (per-session override allowed).
  std::int64_t start_time = 0;

  json to_json() const {
    return {{"k", k}, {"page_size", page_size}, {"step_cap", step_cap}, {"vision_enabled", vision_enabled},
            {"recount_impressions_on_back", recount_impressions_on_back}, {"start_time", start_time}};
  }
  static SandboxConfig from_json(const json& j) {
    SandboxConfig c;
    c.k = j.value("k", c.k);
    c.page_size = j.value("page_size", c.page_size);
    c.step_cap = j.value("step_cap", c.step_cap);
    c.vision_enabled = j.value("vision_enabled", c.vision_enabled);
    c.recount_impressions_on_back = j.value("recount_impressions_on_back", c.recount_impressions_on_back);
    c.start_time = j.value("start_time", c.start_time);
    if (c.k == 0 || c.page_size == 0 || c.step_cap == 0) {
      throw Error(ErrorKind::kConfig, "sandbox k, page_size and step_cap must be positive");
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// Actions

enum class ActionKind { kClick, kNextPage, kPrevPage, kExit, kWatchAndRate, kBack };

inline constexpr std::array<ActionKind, 6> kAllActionKinds = {ActionKind::kClick,  ActionKind::kNextPage,
                                                               ActionKind::kPrevPage, ActionKind::kExit,
                                                               ActionKind::kWatchAndRate, ActionKind::kBack};

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kClick: return "Click";
    case ActionKind::kNextPage: return "NextPage";
    case ActionKind::kPrevPage: return "PrevPage";
    case ActionKind::kExit: return "Exit";
    case ActionKind::kWatchAndRate: return "WatchAndRate";
    case ActionKind::kBack: return "Back";
  }
  return "?";
}

inline std::optional<ActionKind> parse_action_kind(std::string_view s) {
  for (auto k : kAllActionKinds) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

enum class ExitReason { kAgent, kFatigue };

struct Action {
  ActionKind kind = ActionKind::kExit;
  MovieId movie = 0;  // Click
  int rating = 0;     // WatchAndRate
  ExitReason exit_reason = ExitReason::kAgent;

  static Action click(MovieId m) { return {ActionKind::kClick, m, 0, ExitReason::kAgent}; }
  static Action next_page() { return {ActionKind::kNextPage}; }
  static Action prev_page() { return {ActionKind::kPrevPage}; }
  static Action exit(ExitReason why = ExitReason::kAgent) { return {ActionKind::kExit, 0, 0, why}; }
  static Action watch_and_rate(int r) { return {ActionKind::kWatchAndRate, 0, r, ExitReason::kAgent}; }
  static Action back() { return {ActionKind::kBack}; }

  std::string describe() const {
    switch (kind) {
      case ActionKind::kClick: return "Click(" + std::to_string(movie) + ")";
      case ActionKind::kWatchAndRate: return "WatchAndRate(" + std::to_string(rating) + ")";
      default: return to_string(kind);
    }
  }

  bool operator==(const Action&) const = default;
};

using ActionSet = std::set<ActionKind>;

inline std::string describe(const ActionSet& set) {
  std::vector<std::string> names;
  for (auto k : set) names.emplace_back(to_string(k));
  return "{" + join(names, ", ") + "}";
}

// ---------------------------------------------------------------------------
// Events

enum class EventKind { kImpression, kClick, kWatch, kRate, kNavNext, kNavPrev, kNavBack, kExit };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kImpression: return "impression";
    case EventKind::kClick: return "click";
    case EventKind::kWatch: return "watch";
    case EventKind::kRate: return "rate";
    case EventKind::kNavNext: return "nav_next";
    case EventKind::kNavPrev: return "nav_prev";
    case EventKind::kNavBack: return "nav_back";
    case EventKind::kExit: return "exit";
  }
  return "?";
}

inline EventKind parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::kImpression, EventKind::kClick, EventKind::kWatch, EventKind::kRate, EventKind::kNavNext,
                 EventKind::kNavPrev, EventKind::kNavBack, EventKind::kExit}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::kParse, "unknown event kind '" + std::string(s) + "'");
}

enum class TerminationReason { kAgentExit, kFatigueExhausted, kStepCap };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kAgentExit: return "agent_exit";
    case TerminationReason::kFatigueExhausted: return "fatigue_exhausted";
    case TerminationReason::kStepCap: return "step_cap";
  }
  return "?";
}

struct Event {
  std::string session_id;
  std::size_t step = 0;
  EventKind kind = EventKind::kImpression;
  std::vector<MovieId> movie_ids;
  std::optional<int> rating;
  std::optional<std::size_t> page_index;
  std::int64_t timestamp = 0;
  /// Exit events only: why the session ended.
  std::optional<TerminationReason> reason;

  bool operator==(const Event&) const = default;

  ordered_json to_json() const {
    ordered_json j;
    j["session_id"] = session_id;
    j["step"] = step;
    j["kind"] = to_string(kind);
    j["movie_ids"] = movie_ids;
    if (rating) j["rating"] = *rating;
    if (page_index) j["page_index"] = *page_index;
    j["timestamp"] = timestamp;
    if (reason) j["reason"] = to_string(*reason);
    return j;
  }

  static Event from_json(const json& j) {
    Event e;
    e.session_id = j.at("session_id").get<std::string>();
    e.step = j.at("step").get<std::size_t>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.movie_ids = j.at("movie_ids").get<std::vector<MovieId>>();
    if (j.contains("rating") && !j["rating"].is_null()) e.rating = j["rating"].get<int>();
    if (j.contains("page_index") && !j["page_index"].is_null()) e.page_index = j["page_index"].get<std::size_t>();
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    if (j.contains("reason") && !j["reason"].is_null()) {
      const auto r = j["reason"].get<std::string>();
      if (r == "agent_exit") {
        e.reason = TerminationReason::kAgentExit;
      } else if (r == "fatigue_exhausted") {
        e.reason = TerminationReason::kFatigueExhausted;
      } else if (r == "step_cap") {
        e.reason = TerminationReason::kStepCap;
      } else {
        throw Error(ErrorKind::kParse, "unknown exit reason '" + r + "'");
      }
    }
    return e;
  }
};

// ---------------------------------------------------------------------------
// Observations

/// Home-feed granularity: poster, title, rating and genres only.
struct MovieCard {
  MovieId movie_id = 0;
  std::string title;
  std::optional<double> imdb_rating;
  std::vector<std::string> genres;
  std::optional<std::string> poster_ref;  // absent when vision is disabled
};

struct HomeObservation {
  std::size_t page_index = 0;
  std::size_t page_count = 1;
  std::vector<MovieCard> cards;
};

/// Full movie record, plus whether it was already watched this session.
struct DetailObservation {
  Movie movie;
  bool watched = false;
};

using Observation = std::variant<HomeObservation, DetailObservation>;

inline std::string render_text(const MovieCard& c) {
  std::string s = c.title + " [" + join(c.genres, "|") + "]";
  if (c.imdb_rating) s += " IMDb " + detail::format_number(*c.imdb_rating);
  if (c.poster_ref) s += " poster=" + *c.poster_ref;
  return s;
}

/// Plain-text page rendering used in prompts and as the text memory query.
inline std::string render_text(const Observation& obs) {
  if (const auto* home = std::get_if<HomeObservation>(&obs)) {
    std::string s = "Home page " + std::to_string(home->page_index + 1) + " of " + std::to_string(home->page_count) + ":";
    for (std::size_t i = 0; i < home->cards.size(); ++i) {
      s += "\n  " + std::to_string(i + 1) + ". (id " + std::to_string(home->cards[i].movie_id) + ") " +
           render_text(home->cards[i]);
    }
    return s;
  }
  const auto& d = std::get<DetailObservation>(obs);
  const auto& m = d.movie;
  std::string s = "Movie detail page: " + m.title + " (id " + std::to_string(m.movie_id) + ")";
  s += "\n  Genres: " + join(m.genres, "|");
  if (m.imdb_rating) s += "\n  IMDb rating: " + detail::format_number(*m.imdb_rating);
  if (m.vote_count) s += "\n  Votes: " + std::to_string(*m.vote_count);
  if (m.release_date) s += "\n  Released: " + m.release_date->iso();
  if (!m.directors.empty()) s += "\n  Directors: " + join(m.directors, ", ");
  if (!m.actors.empty()) s += "\n  Cast: " + join(m.actors, ", ");
  if (!m.overview.empty()) s += "\n  Overview: " + m.overview;
  if (m.poster_ref) s += "\n  Poster: " + *m.poster_ref;
  if (d.watched) s += "\n  (already watched this session)";
  return s;
}

// ---------------------------------------------------------------------------
// Session state

enum class Page { kHome, kDetail };

struct SessionState {
  std::string session_id;
  UserId user_id = 0;
  std::string arm_id;
  RankedList ranked;
  SandboxConfig config;

  Page page = Page::kHome;
  std::size_t page_index = 0;  // on Detail: the home page the click came from
  MovieId detail_movie = 0;
  std::set<MovieId> watched;
  std::optional<TerminationReason> terminated;
  std::size_t step_count = 0;
  std::vector<Event> events;

  std::size_t page_count() const { return (ranked.items.size() + config.page_size - 1) / config.page_size; }

  std::vector<MovieId> page_items(std::size_t index) const {
    const auto begin = std::min(index * config.page_size, ranked.items.size());
    const auto end = std::min(begin + config.page_size, ranked.items.size());
    return {ranked.items.begin() + static_cast<std::ptrdiff_t>(begin),
            ranked.items.begin() + static_cast<std::ptrdiff_t>(end)};
  }

  bool operator==(const SessionState& o) const {
    return session_id == o.session_id && user_id == o.user_id && arm_id == o.arm_id &&
           ranked.items == o.ranked.items && page == o.page && page_index == o.page_index &&
           detail_movie == o.detail_movie && watched == o.watched && terminated == o.terminated &&
           step_count == o.step_count && events == o.events;
  }
};

struct StepResult {
  Observation observation;
  std::vector<Event> events;
};

/// The sandbox environment. Holds only immutable references, so one
/// instance may drive many concurrent sessions.
class Sandbox {
 public:
  Sandbox(const Catalog& catalog, SandboxConfig config) : catalog_(&catalog), config_(config) {}

  const SandboxConfig& config() const { return config_; }
  const Catalog& catalog() const { return *catalog_; }

  /// Opens on home page 0 and logs its impression. The list is truncated to
  /// k. `start_time` overrides the configured timestamp origin.
  std::pair<SessionState, Observation> start_session(std::string session_id, UserId user, std::string arm_id,
                                                     RankedList ranked,
                                                     std::optional<std::int64_t> start_time = std::nullopt) const {
    if (ranked.items.size() > config_.k) {
      ranked.items.resize(config_.k);
      if (ranked.scores.size() > config_.k) ranked.scores.resize(config_.k);
    }
    if (ranked.items.size() < config_.page_size) {
      throw Error(ErrorKind::kInvalidArgument, "ranked list has " + std::to_string(ranked.items.size()) +
                                                   " items, shorter than one page of " +
                                                   std::to_string(config_.page_size));
    }
    for (auto m : ranked.items) catalog_->movie(m);
    SessionState s;
    s.session_id = std::move(session_id);
    s.user_id = user;
    s.arm_id = std::move(arm_id);
    s.ranked = std::move(ranked);
    s.config = config_;
    if (start_time) s.config.start_time = *start_time;
    std::vector<Event> events;
    auto obs = render_home(s, events);
    s.events = std::move(events);
    return {std::move(s), std::move(obs)};
  }

  ActionSet legal_actions(const SessionState& s) const {
    if (s.terminated) return {};
    if (s.page == Page::kDetail) {
      ActionSet set = {ActionKind::kBack, ActionKind::kExit};
      if (!s.watched.count(s.detail_movie)) set.insert(ActionKind::kWatchAndRate);
      return set;
    }
    ActionSet set = {ActionKind::kClick, ActionKind::kExit};
    if (s.page_index > 0) set.insert(ActionKind::kPrevPage);
    if (s.page_index + 1 < s.page_count()) set.insert(ActionKind::kNextPage);
    return set;
  }

  /// Empty when the action is legal, else a one-line diagnostic.
  std::string check(const SessionState& s, const Action& a) const {
    if (s.terminated) return "illegal: session already terminated";
    const auto legal = legal_actions(s);
    if (!legal.count(a.kind)) {
      std::string why = "illegal: " + std::string(to_string(a.kind)) + " not in " + describe(legal);
      if (a.kind == ActionKind::kWatchAndRate && s.page == Page::kDetail) why += " (movie already watched)";
      return why;
    }
    if (a.kind == ActionKind::kClick) {
      const auto items = s.page_items(s.page_index);
      if (std::find(items.begin(), items.end(), a.movie) == items.end()) {
        return "illegal: movie " + std::to_string(a.movie) + " is not on home page " + std::to_string(s.page_index);
      }
    }
    if (a.kind == ActionKind::kWatchAndRate && (a.rating < 1 || a.rating > 5)) {
      return "illegal: rating " + std::to_string(a.rating) + " outside [1,5]";
    }
    return {};
  }

  /// Applies a legal action. Illegal actions throw kIllegalAction and leave
  /// `s` untouched.
  StepResult step(SessionState& s, const Action& a) const {
    if (auto why = check(s, a); !why.empty()) throw Error(ErrorKind::kIllegalAction, why);

    const std::size_t step_no = s.step_count + 1;
    std::vector<Event> events;
    auto emit = [&](EventKind kind, std::vector<MovieId> ids, std::optional<int> rating = std::nullopt,
                    std::optional<std::size_t> page = std::nullopt) {
      Event e;
      e.session_id = s.session_id;
      e.step = step_no;
      e.kind = kind;
      e.movie_ids = std::move(ids);
      e.rating = rating;
      e.page_index = page;
      e.timestamp = s.config.start_time + static_cast<std::int64_t>(step_no);
      events.push_back(std::move(e));
    };

    s.step_count = step_no;
    std::optional<Observation> obs;
    switch (a.kind) {
      case ActionKind::kClick:
        emit(EventKind::kClick, {a.movie}, std::nullopt, s.page_index);
        s.page = Page::kDetail;
        s.detail_movie = a.movie;
        break;
      case ActionKind::kNextPage:
      case ActionKind::kPrevPage:
        s.page_index += a.kind == ActionKind::kNextPage ? 1 : -1;
        emit(a.kind == ActionKind::kNextPage ? EventKind::kNavNext : EventKind::kNavPrev, {}, std::nullopt,
             s.page_index);
        break;
      case ActionKind::kWatchAndRate:
        emit(EventKind::kWatch, {s.detail_movie});
        emit(EventKind::kRate, {s.detail_movie}, a.rating);
        s.watched.insert(s.detail_movie);
        break;
      case ActionKind::kBack:
        emit(EventKind::kNavBack, {s.detail_movie}, std::nullopt, s.page_index);
        s.page = Page::kHome;
        s.detail_movie = 0;
        break;
      case ActionKind::kExit:
        emit(EventKind::kExit, {}, std::nullopt, s.page == Page::kHome ? std::optional(s.page_index) : std::nullopt);
        s.terminated = a.exit_reason == ExitReason::kFatigue ? TerminationReason::kFatigueExhausted
                                                             : TerminationReason::kAgentExit;
        events.back().reason = *s.terminated;
        break;
    }

    if (!s.terminated && s.page == Page::kHome &&
        (a.kind == ActionKind::kNextPage || a.kind == ActionKind::kPrevPage || a.kind == ActionKind::kBack)) {
      const bool log = a.kind != ActionKind::kBack || config_.recount_impressions_on_back;
      obs = log ? render_home(s, events, step_no) : render_home_silent(s);
    }
    if (!obs) obs = observe(s);
    if (!s.terminated && s.step_count >= config_.step_cap) s.terminated = TerminationReason::kStepCap;
    s.events.insert(s.events.end(), events.begin(), events.end());
    return {std::move(*obs), std::move(events)};
  }

  /// Current page as the agent sees it, without logging anything.
  Observation observe(const SessionState& s) const {
    if (s.page == Page::kDetail) {
      DetailObservation d{catalog_->movie(s.detail_movie), s.watched.count(s.detail_movie) > 0};
      if (!config_.vision_enabled) d.movie.poster_ref.reset();
      return d;
    }
    return render_home_silent(s);
  }

  /// Re-executes a logged session and checks every event it would emit
  /// against the log. Throws kIntegrity at the first divergence.
  SessionState replay(const std::vector<Event>& events, const RankedList& ranked, UserId user = 0,
                      std::string arm_id = {}) const {
    if (events.empty() || events.front().kind != EventKind::kImpression || events.front().step != 0) {
      throw Error(ErrorKind::kIntegrity, "replay: missing initial impression");
    }
    auto fail = [](std::size_t step, const std::string& what) {
      throw Error(ErrorKind::kIntegrity, "replay: step " + std::to_string(step) + ": " + what);
    };
    auto [state, obs] = start_session(events.front().session_id, user, std::move(arm_id), ranked,
                                      events.front().timestamp);
    (void)obs;
    if (state.events.front() != events.front()) fail(0, "initial impression does not match the ranked list");

    std::size_t i = 1;
    while (i < events.size()) {
      const Event& e = events[i];
      if (state.terminated) fail(e.step, "event after termination");
      Action a;
      switch (e.kind) {
        case EventKind::kClick:
          if (e.movie_ids.size() != 1) fail(e.step, "click must carry one movie");
          a = Action::click(e.movie_ids[0]);
          break;
        case EventKind::kWatch:
          if (i + 1 >= events.size() || events[i + 1].kind != EventKind::kRate || !events[i + 1].rating) {
            fail(e.step, "watch without a rate event");
          }
          a = Action::watch_and_rate(*events[i + 1].rating);
          break;
        case EventKind::kNavNext: a = Action::next_page(); break;
        case EventKind::kNavPrev: a = Action::prev_page(); break;
        case EventKind::kNavBack: a = Action::back(); break;
        case EventKind::kExit:
          a = Action::exit(e.reason == TerminationReason::kFatigueExhausted ? ExitReason::kFatigue : ExitReason::kAgent);
          break;
        default: fail(e.step, std::string("unexpected ") + to_string(e.kind) + " event");
      }
      if (auto why = check(state, a); !why.empty()) fail(e.step, why);
      const auto result = step(state, a);
      for (const auto& produced : result.events) {
        if (i >= events.size() || events[i] != produced) {
          fail(produced.step, std::string("log diverges at expected ") + to_string(produced.kind) + " event");
        }
        ++i;
      }
    }
    return state;
  }

 private:
  HomeObservation render_home_silent(const SessionState& s) const {
    HomeObservation h;
    h.page_index = s.page_index;
    h.page_count = s.page_count();
    for (auto m : s.page_items(s.page_index)) {
      const auto& movie = catalog_->movie(m);
      MovieCard c{m, movie.title, movie.imdb_rating, movie.genres, std::nullopt};
      if (config_.vision_enabled) c.poster_ref = movie.poster_ref;
      h.cards.push_back(std::move(c));
    }
    return h;
  }

  HomeObservation render_home(const SessionState& s, std::vector<Event>& events, std::size_t step_no = 0) const {
    auto h = render_home_silent(s);
    Event e;
    e.session_id = s.session_id;
    e.step = step_no;
    e.kind = EventKind::kImpression;
    for (const auto& c : h.cards) e.movie_ids.push_back(c.movie_id);
    e.page_index = s.page_index;
    e.timestamp = s.config.start_time + static_cast<std::int64_t>(step_no);
    events.push_back(std::move(e));
    return h;
  }

  const Catalog* catalog_;
  SandboxConfig config_;
};

// ---------------------------------------------------------------------------
// Event log I/O (JSON-lines)

inline void write_events(std::ostream& out, const std::vector<Event>& events) {
  for (const auto& e : events) out << e.to_json().dump() << '\n';
}

inline std::vector<Event> read_events(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      events.push_back(Event::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, "event log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace absim
