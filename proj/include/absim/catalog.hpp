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

// Movie/user/rating catalog in the MovieLens-1M layout, extended with the
// multimodal movie metadata (overview, IMDb rating, credits, poster ref).

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absim/common.hpp"
#include "json.hpp"

namespace absim {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::array<const char*, 18> kMovieLensGenres = {
    "Action",  "Adventure", "Animation", "Children's", "Comedy",    "Crime",
    "Documentary", "Drama", "Fantasy",   "Film-Noir",  "Horror",    "Musical",
    "Mystery", "Romance",   "Sci-Fi",    "Thriller",   "War",       "Western"};

// ---------------------------------------------------------------------------
// Dates

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  static Date parse(std::string_view text) {
    Date d;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        std::sscanf(std::string(text).c_str(), "%4d-%2d-%2d", &d.year, &d.month, &d.day) != 3 ||
        d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
      throw Error(ErrorKind::kParse, "invalid ISO-8601 date '" + std::string(text) + "'");
    }
    return d;
  }
};

// ---------------------------------------------------------------------------
// Entities

enum class Gender { kMale, kFemale };
enum class ActivityTrait { kLow, kMedium, kHigh };

inline const char* to_string(ActivityTrait t) {
  switch (t) {
    case ActivityTrait::kLow: return "low";
    case ActivityTrait::kMedium: return "medium";
    case ActivityTrait::kHigh: return "high";
  }
  return "medium";
}

inline ActivityTrait parse_activity_trait(std::string_view s) {
  if (s == "low") return ActivityTrait::kLow;
  if (s == "medium") return ActivityTrait::kMedium;
  if (s == "high") return ActivityTrait::kHigh;
  throw Error(ErrorKind::kInvalidArgument, "unknown activity trait '" + std::string(s) + "'");
}

struct Movie {
  MovieId movie_id = 0;
  std::string title;
  std::vector<std::string> genres;
  std::string overview;
  std::optional<double> imdb_rating;
  std::optional<std::int64_t> vote_count;
  std::optional<Date> release_date;
  std::vector<std::string> directors;
  std::vector<std::string> actors;
  std::optional<std::string> poster_ref;

  bool operator==(const Movie&) const = default;
};

struct User {
  UserId user_id = 0;
  Gender gender = Gender::kMale;
  int age = 1;
  int occupation = 0;
  std::string zip;
  ActivityTrait activity_trait = ActivityTrait::kMedium;

  bool operator==(const User&) const = default;
};

struct Interaction {
  UserId user_id = 0;
  MovieId movie_id = 0;
  int rating = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

/// Immutable after construction; safe to share across threads.
struct Catalog {
  std::map<MovieId, Movie> movies;
  std::map<UserId, User> users;
  std::vector<Interaction> interactions;  // file order

  double sparsity() const {
    if (users.empty() || movies.empty()) return 0.0;
    return static_cast<double>(interactions.size()) /
           (static_cast<double>(users.size()) * static_cast<double>(movies.size()));
  }

  const Movie& movie(MovieId id) const {
    auto it = movies.find(id);
    if (it == movies.end()) throw Error(ErrorKind::kIntegrity, "unknown movie_id " + std::to_string(id));
    return it->second;
  }

  const User& user(UserId id) const {
    auto it = users.find(id);
    if (it == users.end()) throw Error(ErrorKind::kIntegrity, "unknown user_id " + std::to_string(id));
    return it->second;
  }

  /// Per-user interactions in chronological order, ties kept in file order.
  std::map<UserId, std::vector<Interaction>> by_user() const {
    std::map<UserId, std::vector<Interaction>> out;
    for (const auto& it : interactions) out[it.user_id].push_back(it);
    for (auto& [_, list] : out) {
      std::stable_sort(list.begin(), list.end(),
                       [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    }
    return out;
  }

  bool operator==(const Catalog&) const = default;
};

// ---------------------------------------------------------------------------
// Loading

struct CatalogPaths {
  std::filesystem::path movies;
  std::filesystem::path users;
  std::filesystem::path interactions;
  std::optional<std::filesystem::path> metadata;

  /// Standard ML-1M file names inside `dir`; metadata.jsonl is picked up if present.
  static CatalogPaths in_directory(const std::filesystem::path& dir) {
    CatalogPaths p{dir / "movies.dat", dir / "users.dat", dir / "ratings.dat", std::nullopt};
    if (std::filesystem::exists(dir / "metadata.jsonl")) p.metadata = dir / "metadata.jsonl";
    return p;
  }
};

struct LoadIssue {
  std::string file;
  std::size_t line = 0;
  std::string field;
  std::string message;

  std::string describe() const {
    return file + ":" + std::to_string(line) + ": " + (field.empty() ? "" : field + ": ") + message;
  }
};

struct LoadOptions {
  /// Throw on the first batch of issues instead of dropping offending rows.
  bool strict = true;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

// ML-1M ships Latin-1 titles; everything downstream is UTF-8.
inline std::string to_utf8(std::string_view s) {
  if (valid_utf8(s)) return std::string(s);
  std::string out;
  for (unsigned char c : s) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back(static_cast<char>(0xc0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
    }
  }
  return out;
}

inline std::int64_t parse_int(std::string_view text, const char* field) {
  std::int64_t v = 0;
  const auto t = trim(text);
  std::size_t used = 0;
  try {
    v = std::stoll(std::string(t), &used);
  } catch (...) {
    used = 0;
  }
  if (t.empty() || used != t.size()) {
    throw LoadIssue{"", 0, field, "expected integer, got '" + std::string(text) + "'"};
  }
  return v;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<std::string> json_string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key) || j[key].is_null()) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace detail

/// Loads and cross-checks the four catalog files.
///
/// Every malformed line, duplicate key and dangling reference is collected
/// with its file and line number. In strict mode any issue aborts the load
/// with an Error listing all of them; otherwise offending rows are dropped
/// and the issues are appended to `issues`.
inline Catalog load_catalog(const CatalogPaths& paths, const LoadOptions& options = {},
                            std::vector<LoadIssue>* issues = nullptr) {
  std::vector<LoadIssue> found;
  Catalog cat;

  auto for_each_row = [&](const std::filesystem::path& path, std::size_t expected_fields,
                          auto&& handle) {
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      auto fields = split(lines[i], "::");
      try {
        if (fields.size() != expected_fields) {
          throw LoadIssue{"", 0, "", "expected " + std::to_string(expected_fields) + " '::'-separated fields, got " +
                                         std::to_string(fields.size())};
        }
        handle(fields);
      } catch (LoadIssue& issue) {
        issue.file = path.filename().string();
        issue.line = i + 1;
        found.push_back(std::move(issue));
      }
    }
  };

  for_each_row(paths.movies, 3, [&](const std::vector<std::string>& f) {
    Movie m;
    m.movie_id = detail::parse_int(f[0], "MovieID");
    if (m.movie_id <= 0) throw LoadIssue{"", 0, "MovieID", "must be positive"};
    m.title = detail::to_utf8(f[1]);
    if (!trim(f[2]).empty()) m.genres = split(f[2], "|");
    if (cat.movies.count(m.movie_id)) {
      throw LoadIssue{"", 0, "MovieID", "duplicate movie_id " + std::to_string(m.movie_id)};
    }
    cat.movies.emplace(m.movie_id, std::move(m));
  });

  for_each_row(paths.users, 5, [&](const std::vector<std::string>& f) {
    User u;
    u.user_id = detail::parse_int(f[0], "UserID");
    if (u.user_id <= 0) throw LoadIssue{"", 0, "UserID", "must be positive"};
    const auto g = trim(f[1]);
    if (g == "M") {
      u.gender = Gender::kMale;
    } else if (g == "F") {
      u.gender = Gender::kFemale;
    } else {
      throw LoadIssue{"", 0, "Gender", "expected M or F, got '" + std::string(g) + "'"};
    }
    u.age = static_cast<int>(detail::parse_int(f[2], "Age"));
    u.occupation = static_cast<int>(detail::parse_int(f[3], "Occupation"));
    u.zip = std::string(trim(f[4]));
    if (cat.users.count(u.user_id)) {
      throw LoadIssue{"", 0, "UserID", "duplicate user_id " + std::to_string(u.user_id)};
    }
    cat.users.emplace(u.user_id, std::move(u));
  });

  std::set<std::tuple<UserId, MovieId, std::int64_t>> keys;
  for_each_row(paths.interactions, 4, [&](const std::vector<std::string>& f) {
    Interaction it;
    it.user_id = detail::parse_int(f[0], "UserID");
    it.movie_id = detail::parse_int(f[1], "MovieID");
    it.rating = static_cast<int>(detail::parse_int(f[2], "Rating"));
    it.timestamp = detail::parse_int(f[3], "Timestamp");
    if (it.rating < 1 || it.rating > 5) throw LoadIssue{"", 0, "Rating", "must be in [1,5]"};
    if (!cat.users.count(it.user_id)) {
      throw LoadIssue{"", 0, "UserID", "unknown user_id " + std::to_string(it.user_id)};
    }
    if (!cat.movies.count(it.movie_id)) {
      throw LoadIssue{"", 0, "MovieID", "unknown movie_id " + std::to_string(it.movie_id)};
    }
    if (!keys.emplace(it.user_id, it.movie_id, it.timestamp).second) {
      throw LoadIssue{"", 0, "", "duplicate (user_id, movie_id, timestamp)"};
    }
    cat.interactions.push_back(it);
  });

  if (paths.metadata) {
    const auto lines = detail::read_lines(*paths.metadata);
    std::set<MovieId> seen_meta;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      try {
        const auto j = json::parse(detail::to_utf8(lines[i]));
        const auto id = j.at("movie_id").get<MovieId>();
        auto it = cat.movies.find(id);
        if (it == cat.movies.end()) throw LoadIssue{"", 0, "movie_id", "unknown movie_id " + std::to_string(id)};
        if (!seen_meta.insert(id).second) {
          throw LoadIssue{"", 0, "movie_id", "duplicate metadata for movie_id " + std::to_string(id)};
        }
        Movie& m = it->second;
        if (j.contains("overview") && !j["overview"].is_null()) m.overview = j["overview"].get<std::string>();
        if (j.contains("imdb_rating") && !j["imdb_rating"].is_null()) m.imdb_rating = j["imdb_rating"].get<double>();
        if (j.contains("vote_count") && !j["vote_count"].is_null()) m.vote_count = j["vote_count"].get<std::int64_t>();
        if (j.contains("release_date") && !j["release_date"].is_null()) {
          try {
            m.release_date = Date::parse(j["release_date"].get<std::string>());
          } catch (const Error& e) {
            throw LoadIssue{"", 0, "release_date", e.what()};
          }
        }
        m.directors = detail::json_string_list(j, "directors");
        m.actors = detail::json_string_list(j, "actors");
        if (j.contains("poster_ref") && !j["poster_ref"].is_null()) m.poster_ref = j["poster_ref"].get<std::string>();
      } catch (LoadIssue& issue) {
        issue.file = paths.metadata->filename().string();
        issue.line = i + 1;
        found.push_back(std::move(issue));
      } catch (const json::exception& e) {
        found.push_back({paths.metadata->filename().string(), i + 1, "", e.what()});
      }
    }
  }

  if (!found.empty() && options.strict) {
    std::string msg = std::to_string(found.size()) + " catalog issue(s):";
    for (std::size_t i = 0; i < found.size() && i < 20; ++i) msg += "\n  " + found[i].describe();
    const bool integrity = std::any_of(found.begin(), found.end(), [](const LoadIssue& x) {
      return x.message.rfind("unknown", 0) == 0 || x.message.rfind("duplicate", 0) == 0;
    });
    throw Error(integrity ? ErrorKind::kIntegrity : ErrorKind::kParse, msg);
  }
  if (issues) issues->insert(issues->end(), found.begin(), found.end());
  return cat;
}

inline Catalog load_catalog(const std::filesystem::path& dir, const LoadOptions& options = {}) {
  return load_catalog(CatalogPaths::in_directory(dir), options);
}

// ---------------------------------------------------------------------------
// Writing

inline json movie_metadata_json(const Movie& m) {
  json j;
  j["movie_id"] = m.movie_id;
  j["overview"] = m.overview;
  j["imdb_rating"] = m.imdb_rating ? json(*m.imdb_rating) : json(nullptr);
  j["vote_count"] = m.vote_count ? json(*m.vote_count) : json(nullptr);
  j["release_date"] = m.release_date ? json(m.release_date->iso()) : json(nullptr);
  j["directors"] = m.directors;
  j["actors"] = m.actors;
  j["poster_ref"] = m.poster_ref ? json(*m.poster_ref) : json(nullptr);
  return j;
}

inline void write_interactions(const std::filesystem::path& path, const std::vector<Interaction>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kMissingInput, "cannot write '" + path.string() + "'");
  for (const auto& r : rows) {
    out << r.user_id << "::" << r.movie_id << "::" << r.rating << "::" << r.timestamp << '\n';
  }
}

/// Writes movies.dat, users.dat, ratings.dat and metadata.jsonl into `dir`.
inline void write_catalog(const Catalog& cat, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "movies.dat", std::ios::binary);
    for (const auto& [id, m] : cat.movies) out << id << "::" << m.title << "::" << join(m.genres, "|") << '\n';
  }
  {
    std::ofstream out(dir / "users.dat", std::ios::binary);
    for (const auto& [id, u] : cat.users) {
      out << id << "::" << (u.gender == Gender::kMale ? "M" : "F") << "::" << u.age << "::" << u.occupation
          << "::" << u.zip << '\n';
    }
  }
  write_interactions(dir / "ratings.dat", cat.interactions);
  {
    std::ofstream out(dir / "metadata.jsonl", std::ios::binary);
    for (const auto& [_, m] : cat.movies) out << movie_metadata_json(m).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Statistics

struct FeatureStats {
  std::string feature;
  std::string type;  // Text | Numerical | Date | Image
  std::int64_t count = 0;
  std::string range_min;  // text: length; numbers as printed; dates ISO
  std::string range_max;
};

struct StatsReport {
  std::vector<FeatureStats> features;
  std::int64_t user_count = 0;
  std::int64_t movie_count = 0;
  std::int64_t interaction_count = 0;
  double sparsity = 0.0;
  std::vector<std::string> violations;  // invariant breaches
  std::vector<std::string> deviations;  // differences from an expectation document

  const FeatureStats* feature(std::string_view name) const {
    for (const auto& f : features) {
      if (f.feature == name) return &f;
    }
    return nullptr;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["features"] = ordered_json::array();
    for (const auto& f : features) {
      ordered_json row;
      row["feature"] = f.feature;
      row["type"] = f.type;
      row["count"] = f.count;
      row["range"] = f.type == "Image" ? ordered_json(nullptr) : ordered_json::array({f.range_min, f.range_max});
      j["features"].push_back(row);
    }
    j["user_count"] = user_count;
    j["movie_count"] = movie_count;
    j["interaction_count"] = interaction_count;
    j["sparsity"] = sparsity;
    j["violations"] = violations;
    j["deviations"] = deviations;
    return j;
  }
};

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%g", v);
  }
  return buf;
}

struct RangeAcc {
  std::int64_t count = 0;
  double lo = 0, hi = 0;
  void add(double v) {
    if (count == 0 || v < lo) lo = v;
    if (count == 0 || v > hi) hi = v;
    ++count;
  }
};

}  // namespace detail

/// Counts, value ranges and text-length ranges per movie feature, in the
/// column layout of the dataset's published statistics table. `expected`,
/// when given, is a document of the same shape; mismatching counts, ranges
/// or sparsity (beyond 1e-4) are listed under `deviations`.
inline StatsReport validate_stats(const Catalog& cat, const json* expected = nullptr,
                                  std::optional<std::pair<Date, Date>> date_window = std::nullopt) {
  StatsReport r;
  detail::RangeAcc title, overview, genres, rating, votes, directors, actors;
  std::int64_t posters = 0;
  std::int64_t dates = 0;
  Date dmin, dmax;

  for (const auto& [id, m] : cat.movies) {
    const auto sid = std::to_string(id);
    if (!m.title.empty()) title.add(static_cast<double>(m.title.size()));
    if (!m.overview.empty()) overview.add(static_cast<double>(m.overview.size()));
    if (!m.genres.empty()) genres.add(static_cast<double>(join(m.genres, "|").size()));
    if (m.imdb_rating) {
      rating.add(*m.imdb_rating);
      if (*m.imdb_rating < 0.0 || *m.imdb_rating > 10.0) {
        r.violations.push_back("movie " + sid + ": imdb_rating " + detail::format_number(*m.imdb_rating) +
                               " outside [0,10]");
      }
    }
    if (m.vote_count) {
      votes.add(static_cast<double>(*m.vote_count));
      if (*m.vote_count < 0) r.violations.push_back("movie " + sid + ": negative vote_count");
    }
    if (m.release_date) {
      if (dates == 0 || *m.release_date < dmin) dmin = *m.release_date;
      if (dates == 0 || *m.release_date > dmax) dmax = *m.release_date;
      ++dates;
      if (date_window && (*m.release_date < date_window->first || *m.release_date > date_window->second)) {
        r.violations.push_back("movie " + sid + ": release_date " + m.release_date->iso() + " outside [" +
                               date_window->first.iso() + ", " + date_window->second.iso() + "]");
      }
    }
    if (!m.directors.empty()) directors.add(static_cast<double>(join(m.directors, ", ").size()));
    if (!m.actors.empty()) actors.add(static_cast<double>(join(m.actors, ", ").size()));
    if (m.poster_ref) ++posters;
  }
  for (const auto& it : cat.interactions) {
    if (it.rating < 1 || it.rating > 5) {
      r.violations.push_back("interaction (" + std::to_string(it.user_id) + ", " + std::to_string(it.movie_id) +
                             "): rating outside [1,5]");
    }
  }

  auto push = [&](const char* name, const char* type, const detail::RangeAcc& a) {
    r.features.push_back({name, type, a.count, a.count ? detail::format_number(a.lo) : "",
                          a.count ? detail::format_number(a.hi) : ""});
  };
  push("Title", "Text", title);
  push("Overview", "Text", overview);
  push("Genres", "Text", genres);
  push("Rating", "Numerical", rating);
  push("Vote Count", "Numerical", votes);
  r.features.push_back({"Release Date", "Date", dates, dates ? dmin.iso() : "", dates ? dmax.iso() : ""});
  push("Directors", "Text", directors);
  push("Actors", "Text", actors);
  r.features.push_back({"Poster", "Image", posters, "", ""});

  r.user_count = static_cast<std::int64_t>(cat.users.size());
  r.movie_count = static_cast<std::int64_t>(cat.movies.size());
  r.interaction_count = static_cast<std::int64_t>(cat.interactions.size());
  r.sparsity = cat.sparsity();

  if (expected) {
    auto check_int = [&](const char* key, std::int64_t actual) {
      if (expected->contains(key) && (*expected)[key].get<std::int64_t>() != actual) {
        r.deviations.push_back(std::string(key) + ": expected " + std::to_string((*expected)[key].get<std::int64_t>()) +
                               ", got " + std::to_string(actual));
      }
    };
    check_int("user_count", r.user_count);
    check_int("movie_count", r.movie_count);
    if (expected->contains("sparsity") && std::fabs((*expected)["sparsity"].get<double>() - r.sparsity) > 1e-4) {
      r.deviations.push_back("sparsity: expected " + detail::format_number((*expected)["sparsity"].get<double>()) +
                             ", got " + detail::format_number(r.sparsity));
    }
    if (expected->contains("features")) {
      for (const auto& ef : (*expected)["features"]) {
        const auto name = ef.at("feature").get<std::string>();
        const auto* actual = r.feature(name);
        if (!actual) {
          r.deviations.push_back(name + ": feature missing");
          continue;
        }
        if (ef.contains("count") && ef["count"].get<std::int64_t>() != actual->count) {
          r.deviations.push_back(name + ": count expected " + std::to_string(ef["count"].get<std::int64_t>()) +
                                 ", got " + std::to_string(actual->count));
        }
        if (ef.contains("range") && ef["range"].is_array() && ef["range"].size() == 2) {
          const auto lo = ef["range"][0].get<std::string>();
          const auto hi = ef["range"][1].get<std::string>();
          if (lo != actual->range_min || hi != actual->range_max) {
            r.deviations.push_back(name + ": range expected [" + lo + ", " + hi + "], got [" + actual->range_min +
                                   ", " + actual->range_max + "]");
          }
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Chronological split

struct SplitRatios {
  double train = 0.7;
  double valid = 0.2;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> valid;
  std::vector<Interaction> test;
  std::vector<std::string> warnings;
};

/// Per-user counts for a split of `n` interactions: floor(n * ratio) each,
/// leftover assigned to train first, then valid.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& r) {
  std::array<std::size_t, 3> c = {static_cast<std::size_t>(std::floor(n * r.train + 1e-9)),
                                   static_cast<std::size_t>(std::floor(n * r.valid + 1e-9)),
                                   static_cast<std::size_t>(std::floor(n * r.test + 1e-9))};
  std::size_t left = n - std::min(n, c[0] + c[1] + c[2]);
  for (std::size_t slot = 0; left > 0; slot = (slot + 1) % 2) {
    ++c[slot];
    --left;
  }
  return c;
}

/// Oldest interactions go to train, then valid, then test, per user.
inline DatasetSplit chronological_split(const Catalog& cat, const SplitRatios& ratios = {}) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0 ||
      std::fabs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-6) {
    throw Error(ErrorKind::kInvalidArgument, "split ratios must be positive and sum to 1");
  }
  DatasetSplit s;
  const auto grouped = cat.by_user();
  for (const auto& [uid, _] : cat.users) {
    auto it = grouped.find(uid);
    if (it == grouped.end()) {
      s.warnings.push_back("user " + std::to_string(uid) + " has no interactions; skipped");
      continue;
    }
    const auto& list = it->second;
    const auto c = split_counts(list.size(), ratios);
    s.train.insert(s.train.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(c[0]));
    s.valid.insert(s.valid.end(), list.begin() + static_cast<std::ptrdiff_t>(c[0]),
                   list.begin() + static_cast<std::ptrdiff_t>(c[0] + c[1]));
    s.test.insert(s.test.end(), list.begin() + static_cast<std::ptrdiff_t>(c[0] + c[1]), list.end());
  }
  return s;
}

/// First `fraction` of each user's chronological train interactions.
inline std::vector<Interaction> train_prefix(const std::vector<Interaction>& train, double fraction) {
  std::map<UserId, std::vector<Interaction>> grouped;
  for (const auto& it : train) grouped[it.user_id].push_back(it);
  std::vector<Interaction> out;
  for (auto& [_, list] : grouped) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(list.size()) - 1e-9));
    keep = std::clamp<std::size_t>(keep, list.empty() ? 0 : 1, list.size());
    out.insert(out.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic catalogs

struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t movies = 300;
  std::size_t genres = 8;
  std::size_t interactions = 6000;
  /// Dirichlet concentration of each user's personal genre affinity; small
  /// values give peaked tastes.
  double concentration = 0.3;
  /// Share of a user's affinity inherited from their age and gender priors.
  double demographic_weight = 0.8;
  std::size_t max_genres_per_movie = 3;
  /// Latent movie "style" dimensions that no catalog feature reveals; users
  /// prefer styles through their demographic priors (plus a personal part).
  std::size_t style_dims = 4;
  /// Log-weight of style match in which movies a user rates (0 disables).
  double style_strength = 1.5;
  /// Log-normal spread of per-user interaction counts (0 gives equal counts).
  double activity_sigma = 0.8;
  /// Floor on interactions per user (clipped to the average when infeasible).
  std::size_t min_interactions_per_user = 10;
  std::int64_t start_time = 978300760;  // first ML-1M timestamp
};

/// A generated catalog plus the ground-truth tastes it was sampled from.
struct SyntheticCatalog {
  Catalog catalog;
  std::vector<std::string> genre_vocabulary;
  std::map<UserId, std::vector<double>> affinity;  // per user, indexed like genre_vocabulary
  std::map<MovieId, double> quality;               // latent [0,1] driving imdb rating and popularity
  std::map<UserId, std::vector<double>> style_preference;
  std::map<MovieId, std::vector<double>> style;

  double style_match(UserId u, MovieId m) const {
    const auto& a = style_preference.at(u);
    const auto& b = style.at(m);
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
  }

  /// Mean affinity over the movie's genres, scaled so a uniform taste gives 1.
  double movie_affinity(UserId u, const Movie& m) const {
    const auto& a = affinity.at(u);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : m.genres) {
      auto pos = std::find(genre_vocabulary.begin(), genre_vocabulary.end(), g);
      if (pos == genre_vocabulary.end()) continue;
      sum += a[static_cast<std::size_t>(pos - genre_vocabulary.begin())];
      ++n;
    }
    return n ? sum / static_cast<double>(n) * static_cast<double>(a.size()) : 0.0;
  }
};

namespace detail {

inline constexpr std::array<int, 7> kAgeBuckets = {1, 18, 25, 35, 45, 50, 56};

inline constexpr std::array<const char*, 24> kTitleWords = {
    "Silent", "Crimson", "Last",   "Broken", "Golden", "Midnight", "Hidden", "Lost",
    "River",  "Empire",  "Garden", "Storm",  "Dream",  "Shadow",   "City",   "Heart",
    "Winter", "Echo",    "Island", "Road",   "Fire",   "Mirror",   "Star",   "Night"};

inline std::string style_word(std::size_t dim, bool positive) {
  static constexpr std::array<std::array<const char*, 2>, 4> kWords = {
      {{"warm", "cool"}, {"bright", "dark"}, {"minimal", "busy"}, {"closeup", "wide"}}};
  if (dim < kWords.size()) return kWords[dim][positive ? 0 : 1];
  return "style" + std::to_string(dim) + (positive ? "a" : "b");
}

inline std::string synthetic_person(const char* role, std::uint64_t n) {
  static constexpr std::array<const char*, 12> kFirst = {"Ada", "Ben", "Cleo", "Dev", "Eli", "Fay",
                                                         "Gus", "Hana", "Ivo", "June", "Kai", "Lena"};
  static constexpr std::array<const char*, 10> kLast = {"Moreau", "Okafor", "Lindqvist", "Tanaka", "Rossi",
                                                        "Novak",  "Haddad", "Quinn",    "Varga",  "Ortiz"};
  return std::string(kFirst[n % kFirst.size()]) + " " + kLast[(n / kFirst.size()) % kLast.size()] + " " + role +
         std::to_string(n / (kFirst.size() * kLast.size()));
}

}  // namespace detail

/// Deterministic desk-scale stand-in for the multimodal MovieLens catalog.
///
/// Each user carries a genre-affinity vector mixing an age/gender prior with a personal Dirichlet draw. Which movies a user rates is drawn
/// without replacement with weight popularity^0.5 * affinity^2 *
/// exp(style_strength * style match), and the
/// rating rises with log-affinity and movie quality.
inline SyntheticCatalog generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.users == 0 || spec.movies == 0 || spec.genres == 0) {
    throw Error(ErrorKind::kInvalidArgument, "synthetic spec needs users, movies and genres > 0");
  }
  if (spec.interactions > spec.users * spec.movies) {
    throw Error(ErrorKind::kInvalidArgument, "interaction count " + std::to_string(spec.interactions) +
                                                 " exceeds users*movies = " + std::to_string(spec.users * spec.movies));
  }
  SyntheticCatalog out;
  for (std::size_t g = 0; g < spec.genres; ++g) {
    out.genre_vocabulary.push_back(g < kMovieLensGenres.size() ? kMovieLensGenres[g]
                                                               : "Genre" + std::to_string(g + 1));
  }
  const std::size_t G = spec.genres;

  // Movies.
  Rng mrng(derive_seed(seed, 1));
  std::vector<double> popularity(spec.movies);
  std::vector<std::vector<std::size_t>> movie_genres(spec.movies);
  for (std::size_t i = 0; i < spec.movies; ++i) {
    Movie m;
    m.movie_id = static_cast<MovieId>(i + 1);
    const std::size_t max_g = std::min(spec.max_genres_per_movie, G);
    std::size_t ng = 1;
    const double r = mrng.uniform();
    if (max_g >= 2 && r < 0.45) ng = 2;
    if (max_g >= 3 && r < 0.15) ng = 3;
    std::vector<std::size_t> pool(G);
    for (std::size_t g = 0; g < G; ++g) pool[g] = g;
    mrng.shuffle(pool);
    pool.resize(ng);
    std::sort(pool.begin(), pool.end());
    movie_genres[i] = pool;
    for (auto g : pool) m.genres.push_back(out.genre_vocabulary[g]);

    const double quality = mrng.uniform();
    out.quality[m.movie_id] = quality;
    std::vector<double> st(spec.style_dims);
    for (auto& x : st) x = mrng.normal() / std::sqrt(static_cast<double>(std::max<std::size_t>(spec.style_dims, 1)));
    out.style[m.movie_id] = std::move(st);
    popularity[i] = std::exp(2.0 * quality + 0.5 * mrng.normal());
    m.imdb_rating = std::clamp(std::round((2.5 + 6.5 * quality + 0.4 * mrng.normal()) * 10.0) / 10.0, 0.0, 10.0);
    m.vote_count = static_cast<std::int64_t>(std::llround(popularity[i] * 250.0));
    const int year = 1930 + static_cast<int>(mrng.below(91));
    m.release_date = Date{year, 1 + static_cast<int>(mrng.below(12)), 1 + static_cast<int>(mrng.below(28))};
    m.title = std::string(detail::kTitleWords[mrng.below(detail::kTitleWords.size())]) + " " +
              detail::kTitleWords[mrng.below(detail::kTitleWords.size())] + " (" + std::to_string(year) + ")";
    std::string genre_words;
    for (std::size_t k = 0; k < m.genres.size(); ++k) genre_words += (k ? " and " : "") + m.genres[k];
    m.overview = "A " + genre_words + " film about " +
                 std::string(detail::kTitleWords[mrng.below(detail::kTitleWords.size())]) + " and " +
                 detail::kTitleWords[mrng.below(detail::kTitleWords.size())] + ".";
    m.directors = {detail::synthetic_person("D", mrng.below(60))};
    for (int a = 0; a < 3; ++a) m.actors.push_back(detail::synthetic_person("A", mrng.below(240)));
    // The poster is the only place the latent style surfaces: one aesthetic
    // word per style dimension, chosen by sign.
    std::string poster = std::to_string(m.movie_id);
    const auto& st_m = out.style[m.movie_id];
    for (std::size_t k = 0; k < st_m.size(); ++k) poster += "_" + detail::style_word(k, st_m[k] >= 0.0);
    m.poster_ref = poster;
    out.catalog.movies.emplace(m.movie_id, std::move(m));
  }

  // Age bucket and gender each carry a taste prior; a user's group prior is their average.
  std::vector<std::vector<double>> age_prior(detail::kAgeBuckets.size());
  for (std::size_t a = 0; a < age_prior.size(); ++a) {
    Rng grng(derive_seed(seed, 2, a));
    age_prior[a] = grng.dirichlet(G, spec.concentration);
  }
  std::array<std::vector<double>, 2> gender_prior;
  for (std::size_t g = 0; g < 2; ++g) {
    Rng grng(derive_seed(seed, 5, g));
    gender_prior[g] = grng.dirichlet(G, spec.concentration);
  }
  auto gaussian_vec = [&](std::uint64_t tag, std::size_t idx) {
    Rng grng(derive_seed(seed, tag, idx));
    std::vector<double> v(spec.style_dims);
    for (auto& x : v) x = grng.normal();
    return v;
  };
  std::vector<std::vector<double>> age_style(detail::kAgeBuckets.size());
  for (std::size_t a = 0; a < age_style.size(); ++a) age_style[a] = gaussian_vec(6, a);
  const std::array<std::vector<double>, 2> gender_style = {gaussian_vec(7, 0), gaussian_vec(7, 1)};

  // Users.
  Rng urng(derive_seed(seed, 3));
  std::vector<double> activity(spec.users);
  for (std::size_t i = 0; i < spec.users; ++i) {
    User u;
    u.user_id = static_cast<UserId>(i + 1);
    u.gender = urng.below(2) ? Gender::kFemale : Gender::kMale;
    const std::size_t age_idx = urng.below(detail::kAgeBuckets.size());
    u.age = detail::kAgeBuckets[age_idx];
    u.occupation = static_cast<int>(urng.below(21));
    char zip[8];
    std::snprintf(zip, sizeof(zip), "%05d", static_cast<int>(urng.below(100000)));
    u.zip = zip;
    const auto personal = urng.dirichlet(G, spec.concentration);
    const auto& by_gender = gender_prior[u.gender == Gender::kFemale ? 1 : 0];
    std::vector<double> a(G);
    for (std::size_t g = 0; g < G; ++g) {
      const double prior = 0.5 * (age_prior[age_idx][g] + by_gender[g]);
      a[g] = spec.demographic_weight * prior + (1.0 - spec.demographic_weight) * personal[g];
    }
    out.affinity[u.user_id] = std::move(a);
    const auto& gs = gender_style[u.gender == Gender::kFemale ? 1 : 0];
    std::vector<double> sp(spec.style_dims);
    for (std::size_t k = 0; k < spec.style_dims; ++k) {
      sp[k] = spec.demographic_weight * (age_style[age_idx][k] + gs[k]) / std::sqrt(2.0) +
              (1.0 - spec.demographic_weight) * urng.normal();
    }
    out.style_preference[u.user_id] = std::move(sp);
    activity[i] = std::exp(spec.activity_sigma * urng.normal());
    out.catalog.users.emplace(u.user_id, std::move(u));
  }

  // Interaction counts: a floor per user, the rest proportional to activity,
  // exact total, capped at |movies|.
  std::vector<std::size_t> counts(spec.users, 0);
  {
    const std::size_t floor_n =
        std::min({spec.min_interactions_per_user, spec.interactions / spec.users, spec.movies});
    const std::size_t rest = spec.interactions - floor_n * spec.users;
    const double total_w = std::accumulate(activity.begin(), activity.end(), 0.0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < spec.users; ++i) {
      const double want = static_cast<double>(rest) * activity[i] / total_w;
      counts[i] = std::min(spec.movies, floor_n + static_cast<std::size_t>(want));
      assigned += counts[i];
      frac.emplace_back(want - std::floor(want), i);
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < spec.interactions; k = (k + 1) % spec.users) {
      const auto i = frac[k].second;
      if (counts[i] < spec.movies) {
        ++counts[i];
        ++assigned;
      }
    }
  }

  Rng irng(derive_seed(seed, 4));
  for (std::size_t i = 0; i < spec.users; ++i) {
    const auto uid = static_cast<UserId>(i + 1);
    std::vector<std::pair<double, std::size_t>> keys(spec.movies);
    std::vector<double> aff(spec.movies);
    for (std::size_t j = 0; j < spec.movies; ++j) {
      aff[j] = out.movie_affinity(uid, out.catalog.movies.at(static_cast<MovieId>(j + 1)));
      const auto mid = static_cast<MovieId>(j + 1);
      const double w = std::sqrt(popularity[j]) * (aff[j] * aff[j] + 1e-6) *
                       std::exp(spec.style_strength * out.style_match(uid, mid));
      double u = irng.uniform();
      while (u <= 0.0) u = irng.uniform();
      keys[j] = {std::log(u) / w, j};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(counts[i]), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::size_t> picked(counts[i]);
    for (std::size_t k = 0; k < counts[i]; ++k) picked[k] = keys[k].second;
    irng.shuffle(picked);
    std::vector<std::int64_t> times(counts[i]);
    for (auto& t : times) t = spec.start_time + static_cast<std::int64_t>(irng.below(2 * 365 * 86400));
    std::sort(times.begin(), times.end());
    for (std::size_t k = 0; k < counts[i]; ++k) {
      const auto j = picked[k];
      const auto mid = static_cast<MovieId>(j + 1);
      const double z = 0.9 * std::log(aff[j] + 0.05) + 1.2 * (out.quality[mid] - 0.5) + 0.5 * irng.normal();
      const int rating = static_cast<int>(std::clamp(std::lround(3.3 + z), 1l, 5l));
      out.catalog.interactions.push_back({uid, mid, rating, times[k]});
    }
  }
  return out;
}

}  // namespace absim
