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

// Agent memory: an embedding-indexed long-term store (text and image
// modalities, one store per user) and an in-session short-term log.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absim/catalog.hpp"
#include "absim/common.hpp"
#include "absim/sandbox.hpp"

namespace absim {

using Embedding = std::vector<double>;

enum class ProviderKind { kRemoteText, kRemoteImage, kDeterministicTest };

inline const char* to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::kRemoteText: return "remote_text";
    case ProviderKind::kRemoteImage: return "remote_image";
    case ProviderKind::kDeterministicTest: return "deterministic_test";
  }
  return "?";
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderKind kind() const = 0;
  virtual std::size_t dimension() const = 0;
  /// `input` is text, or an asset reference for image providers.
  virtual Embedding embed(std::string_view input) const = 0;
};

inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cosine: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::kInvalidArgument, "cosine: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Offline stand-in for a real encoder. Each input token (maximal run of
/// alphanumerics, apostrophes, hyphens or non-ASCII bytes, case preserved) adds a pseudo-random
/// unit-scale direction seeded by its bytes, so texts sharing words are
/// closer. Tokens found in the genre vocabulary add a fixed per-genre
/// direction scaled by `genre_bonus`, which makes same-genre texts (and
/// poster references naming their genres) measurably similar. The sum is
/// L2-normalized. Pure function of the input bytes.
class DeterministicEmbedder final : public EmbeddingProvider {
 public:
  explicit DeterministicEmbedder(std::size_t dimension = 64, double genre_bonus = 2.0,
                                 std::vector<std::string> genre_vocabulary = {})
      : dimension_(dimension), genre_bonus_(genre_bonus), genres_(std::move(genre_vocabulary)) {
    if (dimension_ == 0) throw Error(ErrorKind::kConfig, "embedding dimension must be positive");
    if (genres_.empty()) genres_.assign(kMovieLensGenres.begin(), kMovieLensGenres.end());
  }

  ProviderKind kind() const override { return ProviderKind::kDeterministicTest; }
  std::size_t dimension() const override { return dimension_; }

  Embedding embed(std::string_view input) const override {
    if (input.empty()) throw Error(ErrorKind::kInvalidArgument, "embed: empty input");
    Embedding v(dimension_, 0.0);
    // Whole-input component: keeps distinct strings distinct even when they
    // tokenize identically (e.g. differing only in case or punctuation).
    add_direction(v, fnv1a64(input, 0x51ed270b27a4c3f1ull), 0.25);
    std::size_t i = 0;
    while (i < input.size()) {
      while (i < input.size() && !is_word(input[i])) ++i;
      const std::size_t start = i;
      while (i < input.size() && is_word(input[i])) ++i;
      if (i == start) break;
      const auto token = input.substr(start, i - start);
      add_direction(v, fnv1a64(token), 1.0);
      for (std::size_t g = 0; g < genres_.size(); ++g) {
        if (token == genres_[g]) {
          add_direction(v, derive_seed(0x6e6e7265ull, g), genre_bonus_);
        }
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

 private:
  static bool is_word(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '\'' || c == '-' || u >= 0x80;
  }

  void add_direction(Embedding& v, std::uint64_t seed, double scale) const {
    std::uint64_t h = seed;
    for (std::size_t d = 0; d < dimension_; ++d) {
      h = splitmix64(h);
      v[d] += scale * (2.0 * to_unit(h) - 1.0);
    }
  }

  std::size_t dimension_;
  double genre_bonus_;
  std::vector<std::string> genres_;
};

// ---------------------------------------------------------------------------
// Long-term memory

enum class Modality { kText, kImage };

inline const char* to_string(Modality m) { return m == Modality::kText ? "text" : "image"; }

inline Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::kText;
  if (s == "image") return Modality::kImage;
  throw Error(ErrorKind::kParse, "unknown modality '" + std::string(s) + "'");
}

struct MemoryRecord {
  Modality modality = Modality::kText;
  UserId user_id = 0;
  MovieId movie_id = 0;
  std::string session_id;
  std::int64_t timestamp = 0;
  Embedding embedding;
  std::string payload;

  bool operator==(const MemoryRecord&) const = default;

  ordered_json to_json() const {
    ordered_json j;
    j["modality"] = to_string(modality);
    j["user_id"] = user_id;
    j["movie_id"] = movie_id;
    j["session_id"] = session_id;
    j["timestamp"] = timestamp;
    j["embedding"] = embedding;
    j["payload"] = payload;
    return j;
  }

  static MemoryRecord from_json(const json& j) {
    MemoryRecord r;
    r.modality = parse_modality(j.at("modality").get<std::string>());
    r.user_id = j.at("user_id").get<UserId>();
    r.movie_id = j.at("movie_id").get<MovieId>();
    r.session_id = j.at("session_id").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    r.embedding = j.at("embedding").get<Embedding>();
    r.payload = j.at("payload").get<std::string>();
    return r;
  }
};

struct Query {
  Modality modality = Modality::kText;
  Embedding embedding;
  std::size_t top_k = 5;
};

struct Retrieved {
  const MemoryRecord* record;
  double similarity;
};

/// Ranking order shared by every store: similarity descending, then the
/// most recent record, then the smaller movie id. Records are compared by
/// address last, which is insertion order for a vector-backed store.
inline bool retrieval_before(const Retrieved& a, const Retrieved& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  if (a.record->timestamp != b.record->timestamp) return a.record->timestamp > b.record->timestamp;
  if (a.record->movie_id != b.record->movie_id) return a.record->movie_id < b.record->movie_id;
  return std::less<const MemoryRecord*>()(a.record, b.record);
}

class MemoryStore {
 public:
  virtual ~MemoryStore() = default;
  virtual UserId user_id() const = 0;
  virtual void add(MemoryRecord record) = 0;
  virtual std::vector<Retrieved> retrieve(const Query& query) const = 0;
  virtual const std::vector<MemoryRecord>& records() const = 0;
};

/// Exhaustive-scan store for one user. Adequate for thousands of records.
class LongTermMemory final : public MemoryStore {
 public:
  explicit LongTermMemory(UserId user = 0) : user_(user) {}

  UserId user_id() const override { return user_; }

  void add(MemoryRecord record) override {
    if (record.user_id != user_) {
      throw Error(ErrorKind::kInvalidArgument, "memory record for user " + std::to_string(record.user_id) +
                                                   " added to store of user " + std::to_string(user_));
    }
    if (record.payload.empty()) throw Error(ErrorKind::kInvalidArgument, "memory record with empty payload");
    if (record.embedding.empty()) throw Error(ErrorKind::kInvalidArgument, "memory record without embedding");
    records_.push_back(std::move(record));
  }

  std::vector<Retrieved> retrieve(const Query& query) const override {
    if (query.top_k == 0) throw Error(ErrorKind::kInvalidArgument, "query top_k must be >= 1");
    std::vector<Retrieved> hits;
    for (const auto& r : records_) {
      if (r.modality != query.modality || r.user_id != user_) continue;
      hits.push_back({&r, cosine(query.embedding, r.embedding)});
    }
    const auto n = std::min(query.top_k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), retrieval_before);
    hits.resize(n);
    return hits;
  }

  const std::vector<MemoryRecord>& records() const override { return records_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::kMissingInput, "cannot write " + path.string());
    out.precision(17);
    for (const auto& r : records_) out << r.to_json().dump() << '\n';
  }

  static LongTermMemory load(const std::filesystem::path& path, UserId user) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kMissingInput, "cannot read " + path.string());
    LongTermMemory mem(user);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      try {
        mem.add(MemoryRecord::from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
    return mem;
  }

 private:
  UserId user_;
  std::vector<MemoryRecord> records_;
};

// ---------------------------------------------------------------------------
// Short-term memory

enum class InterfaceType { kHome, kDetail };

struct ShortTermEntry {
  std::size_t step = 0;
  InterfaceType interface_type = InterfaceType::kHome;
  std::string observation_summary;
  int interest = 1;
  Action action_taken;
  /// Movie the action concerned (the clicked card, or the detail page).
  std::optional<MovieId> movie_id;
};

class ShortTermMemory {
 public:
  void append(ShortTermEntry entry) {
    if (!entries_.empty() && entry.step <= entries_.back().step) {
      throw Error(ErrorKind::kInvalidArgument, "short-term step " + std::to_string(entry.step) +
                                                   " not after " + std::to_string(entries_.back().step));
    }
    if (entry.interest < 1 || entry.interest > 5) {
      throw Error(ErrorKind::kInvalidArgument, "short-term interest outside [1,5]");
    }
    entries_.push_back(std::move(entry));
  }

  const std::vector<ShortTermEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// One line per entry, for prompts.
  std::string transcript() const {
    std::string s;
    for (const auto& e : entries_) {
      if (!s.empty()) s += '\n';
      s += "step " + std::to_string(e.step) + " [" + (e.interface_type == InterfaceType::kHome ? "home" : "detail") +
           "] interest " + std::to_string(e.interest) + " -> " + e.action_taken.describe();
    }
    return s;
  }

 private:
  std::vector<ShortTermEntry> entries_;
};

struct ConsolidationContext {
  const Catalog* catalog = nullptr;
  const EmbeddingProvider* text = nullptr;
  const EmbeddingProvider* image = nullptr;  // ignored unless vision is on
  bool vision_enabled = true;
  UserId user_id = 0;
  std::string session_id;
  std::int64_t start_time = 0;  // timestamps mirror the event log: start_time + step
};

inline std::string memory_payload(const ShortTermEntry& e, const Movie& m) {
  const std::string tail = " (" + join(m.genres, "|") + ")";
  if (e.action_taken.kind == ActionKind::kWatchAndRate) {
    return "rated " + m.title + " " + std::to_string(e.action_taken.rating) + ".0" + tail;
  }
  return "clicked " + m.title + tail;
}

/// Session-end flush: clicks and watches become text records, plus one
/// image record each for the poster when vision is on.
inline std::vector<MemoryRecord> consolidate(const ShortTermMemory& stm, const ConsolidationContext& ctx) {
  if (!ctx.catalog || !ctx.text) throw Error(ErrorKind::kConfig, "consolidate: catalog and text provider required");
  std::vector<MemoryRecord> out;
  for (const auto& e : stm.entries()) {
    const auto k = e.action_taken.kind;
    if ((k != ActionKind::kClick && k != ActionKind::kWatchAndRate) || !e.movie_id) continue;
    const Movie& m = ctx.catalog->movie(*e.movie_id);
    MemoryRecord r;
    r.modality = Modality::kText;
    r.user_id = ctx.user_id;
    r.movie_id = m.movie_id;
    r.session_id = ctx.session_id;
    r.timestamp = ctx.start_time + static_cast<std::int64_t>(e.step);
    r.payload = memory_payload(e, m);
    r.embedding = ctx.text->embed(r.payload);
    out.push_back(r);
    if (ctx.vision_enabled && ctx.image && m.poster_ref && !m.poster_ref->empty()) {
      r.modality = Modality::kImage;
      r.embedding = ctx.image->embed(*m.poster_ref);
      r.payload = "poster of " + m.title + ": " + *m.poster_ref;
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Query formulation: the rendered page text for the text modality, the
/// visible poster references for the image modality.
inline std::optional<Query> make_query(const Observation& obs, Modality modality, const EmbeddingProvider& provider,
                                       std::size_t top_k) {
  std::string input;
  if (modality == Modality::kText) {
    input = render_text(obs);
  } else if (const auto* home = std::get_if<HomeObservation>(&obs)) {
    std::vector<std::string> refs;
    for (const auto& c : home->cards) {
      if (c.poster_ref) refs.push_back(*c.poster_ref);
    }
    input = join(refs, " ");
  } else {
    const auto& d = std::get<DetailObservation>(obs);
    if (d.movie.poster_ref) input = *d.movie.poster_ref;
  }
  if (input.empty()) return std::nullopt;
  return Query{modality, provider.embed(input), top_k};
}

}  // namespace absim
