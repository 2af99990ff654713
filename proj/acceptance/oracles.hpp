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

// Independent reference implementations used by the unit suites and the
// acceptance runner. They deliberately avoid the library code paths they
// check: metrics are recounted from serialized event lines, retrieval is a
// full sort, and session properties are read straight off the event log.
#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "absim/memory.hpp"
#include "absim/sandbox.hpp"

namespace absim::oracle {

/// Properties every session log must satisfy, assuming Back re-renders.
/// Returns one message per violation.
inline std::vector<std::string> session_violations(const std::vector<Event>& events) {
  std::vector<std::string> out;
  if (events.empty() || events[0].kind != EventKind::kImpression || events[0].step != 0) {
    out.emplace_back("log does not open with a step-0 impression");
    return out;
  }
  std::size_t impressions = 0, navs = 0;
  const std::vector<MovieId>* last_impression = nullptr;
  MovieId open_detail = 0;  // clicked and not yet backed out of; 0 for none
  bool ended = false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto at = "event " + std::to_string(i) + " (" + to_string(e.kind) + "): ";
    if (ended) out.push_back(at + "after exit");
    if (i > 0 && e.step < events[i - 1].step) out.push_back(at + "step goes backwards");
    switch (e.kind) {
      case EventKind::kImpression:
        ++impressions;
        last_impression = &e.movie_ids;
        break;
      case EventKind::kClick:
        if (e.movie_ids.size() != 1 || !last_impression ||
            std::find(last_impression->begin(), last_impression->end(), e.movie_ids[0]) == last_impression->end()) {
          out.push_back(at + "click not on the last impressed page");
        } else {
          open_detail = e.movie_ids[0];
        }
        break;
      case EventKind::kWatch:
        if (open_detail == 0 || e.movie_ids != std::vector<MovieId>{open_detail}) {
          out.push_back(at + "watch without a preceding click on the same movie");
        }
        if (i + 1 >= events.size() || events[i + 1].kind != EventKind::kRate ||
            events[i + 1].movie_ids != e.movie_ids || !events[i + 1].rating) {
          out.push_back(at + "watch not followed by a rating of the same movie");
        }
        break;
      case EventKind::kRate:
        if (i == 0 || events[i - 1].kind != EventKind::kWatch) out.push_back(at + "rate without watch");
        break;
      case EventKind::kNavBack:
        open_detail = 0;
        ++navs;
        break;
      case EventKind::kNavNext:
      case EventKind::kNavPrev: ++navs; break;
      case EventKind::kExit: ended = true; break;
    }
  }
  if (impressions != 1 + navs) {
    out.push_back("impression accounting: " + std::to_string(impressions) + " impressions vs 1 + " +
                  std::to_string(navs) + " navigations");
  }
  return out;
}

/// Drives one session with uniformly random legal actions, probing an
/// illegal action every few steps (it must be rejected without any state
/// change) and probing once more after termination.
inline std::pair<SessionState, std::vector<std::string>> random_walk(const Sandbox& sandbox, const RankedList& ranked,
                                                                     const std::string& id, Rng& rng) {
  std::vector<std::string> problems;
  auto [state, obs] = sandbox.start_session(id, 1, "fuzz", ranked);
  auto probe = [&](const Action& a) {
    const SessionState before = state;
    try {
      sandbox.step(state, a);
      problems.push_back("illegal " + a.describe() + " accepted at step " + std::to_string(before.step_count));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kIllegalAction) problems.push_back(std::string("wrong error kind: ") + e.what());
    }
    if (!(state == before)) problems.push_back("rejected " + a.describe() + " changed the state");
  };
  while (!state.terminated) {
    const auto legal = sandbox.legal_actions(state);
    if (rng.below(4) == 0) {
      std::vector<ActionKind> illegal;
      for (auto k : kAllActionKinds) {
        if (!legal.count(k)) illegal.push_back(k);
      }
      if (!illegal.empty()) {
        Action a{illegal[rng.below(illegal.size())]};
        a.rating = 3;
        a.movie = ranked.items[0];
        probe(a);
      }
    }
    std::vector<ActionKind> options(legal.begin(), legal.end());
    // Keep exits rare so walks explore the graph.
    if (options.size() > 1 && rng.below(10) != 0) std::erase(options, ActionKind::kExit);
    Action a{options[rng.below(options.size())]};
    if (a.kind == ActionKind::kClick) {
      const auto items = state.page_items(state.page_index);
      a.movie = items[rng.below(items.size())];
    }
    if (a.kind == ActionKind::kWatchAndRate) a.rating = 1 + static_cast<int>(rng.below(5));
    if (a.kind == ActionKind::kExit && rng.below(2)) a.exit_reason = ExitReason::kFatigue;
    sandbox.step(state, a);
  }
  if (!sandbox.legal_actions(state).empty()) problems.emplace_back("terminated state has legal actions");
  probe(Action::exit());
  probe(Action::click(ranked.items[0]));
  return {std::move(state), std::move(problems)};
}

struct Recount {
  long impressed = 0, clicks = 0, watches = 0, rates = 0, rating_sum = 0;

  std::optional<double> ctr() const {
    return impressed ? std::optional<double>(static_cast<double>(clicks) / static_cast<double>(impressed)) : std::nullopt;
  }
  std::optional<double> cvr() const {
    return impressed ? std::optional<double>(static_cast<double>(watches) / static_cast<double>(impressed)) : std::nullopt;
  }
  std::optional<double> ar() const {
    return rates ? std::optional<double>(static_cast<double>(rating_sum) / static_cast<double>(rates)) : std::nullopt;
  }
};

/// Counts from the JSON-lines form of the log, keyed on the wire names.
inline Recount recount(const std::vector<Event>& events) {
  std::ostringstream buf;
  write_events(buf, events);
  std::istringstream in(buf.str());
  Recount r;
  for (std::string line; std::getline(in, line);) {
    const auto j = json::parse(line);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "impression") r.impressed += static_cast<long>(j.at("movie_ids").size());
    if (kind == "click") ++r.clicks;
    if (kind == "watch") ++r.watches;
    if (kind == "rate") {
      ++r.rates;
      r.rating_sum += j.at("rating").get<long>();
    }
  }
  return r;
}

/// Exhaustive scan: scores every record of the modality, then fully sorts
/// by (similarity desc, timestamp desc, movie id asc, insertion order).
inline std::vector<std::size_t> top_k(const std::vector<MemoryRecord>& records, const Query& q) {
  struct Row {
    double sim;
    std::int64_t ts;
    MovieId movie;
    std::size_t index;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].modality != q.modality) continue;
    rows.push_back({cosine(q.embedding, records[i].embedding), records[i].timestamp, records[i].movie_id, i});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(b.sim, b.ts, a.movie, a.index) < std::tie(a.sim, a.ts, b.movie, b.index);
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size() && i < q.top_k; ++i) out.push_back(rows[i].index);
  return out;
}

}  // namespace absim::oracle
