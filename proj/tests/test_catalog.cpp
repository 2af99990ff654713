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

#include <algorithm>
#include <numeric>

#include "absim/catalog.hpp"
#include "testing.hpp"

namespace absim {
namespace {

using testing::read_text;
using testing::TempDir;
using testing::tiny_catalog;
using testing::write_text;

void write_minimal(const TempDir& dir, const std::string& ratings) {
  write_text(dir / "movies.dat", "1::Alpha (1995)::Action|Comedy\n2::Beta (1996)::Drama\n");
  write_text(dir / "users.dat", "1::M::25::4::12345\n2::F::35::7::54321\n");
  write_text(dir / "ratings.dat", ratings);
}

TEST(LoadCatalog, ParsesMovieLensFiles) {
  TempDir dir;
  write_minimal(dir, "1::1::5::100\n1::2::3::101\n2::2::4::99\n");
  const auto cat = load_catalog(dir.path());
  ASSERT_EQ(cat.movies.size(), 2u);
  ASSERT_EQ(cat.users.size(), 2u);
  ASSERT_EQ(cat.interactions.size(), 3u);
  EXPECT_EQ(cat.movie(1).genres, (std::vector<std::string>{"Action", "Comedy"}));
  EXPECT_EQ(cat.user(2).gender, Gender::kFemale);
  EXPECT_EQ(cat.user(1).zip, "12345");
  EXPECT_EQ(cat.interactions[2], (Interaction{2, 2, 4, 99}));
  EXPECT_DOUBLE_EQ(cat.sparsity(), 3.0 / 4.0);
}

TEST(LoadCatalog, EmptyInteractionsGiveZeroSparsity) {
  TempDir dir;
  write_minimal(dir, "");
  const auto cat = load_catalog(dir.path());
  EXPECT_TRUE(cat.interactions.empty());
  EXPECT_EQ(cat.sparsity(), 0.0);
}

TEST(LoadCatalog, DanglingMovieReferenceNamesTheLine) {
  TempDir dir;
  write_minimal(dir, "1::1::5::100\n1::99999::3::101\n");
  try {
    load_catalog(dir.path());
    FAIL() << "expected an integrity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrity);
    EXPECT_NE(std::string(e.what()).find("ratings.dat:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("99999"), std::string::npos) << e.what();
  }
}

TEST(LoadCatalog, LenientModeReportsAndDropsBadRows) {
  TempDir dir;
  write_minimal(dir, "1::1::5::100\n1::99999::3::101\n2::1::x::5\n2::2::4\n");
  std::vector<LoadIssue> issues;
  const auto cat = load_catalog(CatalogPaths::in_directory(dir.path()), LoadOptions{false}, &issues);
  EXPECT_EQ(cat.interactions.size(), 1u);
  ASSERT_EQ(issues.size(), 3u);
  EXPECT_EQ(issues[0].line, 2u);
  EXPECT_EQ(issues[1].line, 3u);
  EXPECT_EQ(issues[1].field, "Rating");
  EXPECT_EQ(issues[2].line, 4u);
}

TEST(LoadCatalog, RejectsDuplicatePrimaryKeys) {
  TempDir dir;
  write_minimal(dir, "");
  write_text(dir / "movies.dat", "1::Alpha::Action\n1::Again::Drama\n");
  try {
    load_catalog(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrity);
    EXPECT_NE(std::string(e.what()).find("movies.dat:2"), std::string::npos);
  }
}

TEST(LoadCatalog, MissingFileIsMissingInput) {
  TempDir dir;
  write_minimal(dir, "");
  std::filesystem::remove(dir / "users.dat");
  try {
    load_catalog(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
    EXPECT_NE(std::string(e.what()).find("users.dat"), std::string::npos);
  }
}

TEST(LoadCatalog, RoundTripsThroughWriteCatalog) {
  auto cat = generate_synthetic(SyntheticSpec{20, 30, 5, 200}, 3).catalog;
  TempDir dir;
  write_catalog(cat, dir.path());
  const auto back = load_catalog(dir.path());
  EXPECT_EQ(back, cat);
  // And a second pass reproduces the files byte for byte.
  TempDir again;
  write_catalog(back, again.path());
  for (const char* f : {"movies.dat", "users.dat", "ratings.dat", "metadata.jsonl"}) {
    EXPECT_EQ(read_text(dir / f), read_text(again / f)) << f;
  }
}

TEST(ValidateStats, TenByTenByTenHasSparsityOneTenth) {
  auto cat = tiny_catalog(10, 10);
  for (int i = 1; i <= 10; ++i) cat.interactions.push_back({i, i, 4, 1000 + i});
  const auto r = validate_stats(cat);
  EXPECT_DOUBLE_EQ(r.sparsity, 10.0 / (10.0 * 10.0));
  EXPECT_EQ(r.user_count, 10);
  EXPECT_EQ(r.movie_count, 10);
  EXPECT_EQ(r.interaction_count, 10);
  EXPECT_TRUE(r.violations.empty());
}

TEST(ValidateStats, FlagsImdbRatingOutOfRange) {
  auto cat = tiny_catalog(2, 3);
  cat.movies.at(2).imdb_rating = 11.0;
  const auto r = validate_stats(cat);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("movie 2"), std::string::npos);
}

TEST(ValidateStats, FeatureRangesMatchBruteForce) {
  const auto cat = tiny_catalog(3, 12);
  const auto r = validate_stats(cat);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [_, m] : cat.movies) {
    lo = std::min(lo, m.overview.size());
    hi = std::max(hi, m.overview.size());
  }
  const auto* ov = r.feature("Overview");
  ASSERT_NE(ov, nullptr);
  EXPECT_EQ(ov->count, 12);
  EXPECT_EQ(ov->range_min, std::to_string(lo));
  EXPECT_EQ(ov->range_max, std::to_string(hi));
  EXPECT_EQ(r.feature("Vote Count")->range_min, "100");
  EXPECT_EQ(r.feature("Vote Count")->range_max, "1200");
  EXPECT_EQ(r.feature("Poster")->count, 12);
}

TEST(ValidateStats, ReportsDeviationsFromExpectations) {
  auto cat = tiny_catalog(4, 5);
  const json expected = {{"user_count", 4},
                         {"movie_count", 6},
                         {"features", {{{"feature", "Vote Count"}, {"range", {"0", "500"}}}}}};
  const auto r = validate_stats(cat, &expected);
  ASSERT_EQ(r.deviations.size(), 2u);
  EXPECT_NE(r.deviations[0].find("movie_count"), std::string::npos);
  EXPECT_NE(r.deviations[1].find("Vote Count"), std::string::npos);
}

TEST(ChronologicalSplit, TenInteractionsSplitSevenTwoOne) {
  auto cat = tiny_catalog(1, 10);
  // Written newest first so ordering must come from timestamps.
  for (int i = 10; i >= 1; --i) cat.interactions.push_back({1, i, 3, 100 * i});
  const auto s = chronological_split(cat);
  ASSERT_EQ(s.train.size(), 7u);
  ASSERT_EQ(s.valid.size(), 2u);
  ASSERT_EQ(s.test.size(), 1u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(s.train[i].movie_id, static_cast<MovieId>(i + 1));
  EXPECT_EQ(s.valid[0].movie_id, 8);
  EXPECT_EQ(s.test[0].movie_id, 10);
}

TEST(ChronologicalSplit, SingleInteractionGoesToTrain) {
  auto cat = tiny_catalog(1, 2);
  cat.interactions.push_back({1, 2, 5, 7});
  const auto s = chronological_split(cat);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_TRUE(s.valid.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(ChronologicalSplit, EqualTimestampsKeepFileOrder) {
  auto cat = tiny_catalog(1, 10);
  const std::vector<MovieId> order = {4, 9, 1, 7, 2, 10, 5, 3, 8, 6};
  for (auto m : order) cat.interactions.push_back({1, m, 3, 50});
  const auto a = chronological_split(cat);
  const auto b = chronological_split(cat);
  ASSERT_EQ(a.train.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(a.train[i].movie_id, order[i]);
  EXPECT_EQ(a.valid[0].movie_id, 3);
  EXPECT_EQ(a.test[0].movie_id, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);
}

TEST(ChronologicalSplit, UserWithoutInteractionsIsSkippedWithWarning) {
  auto cat = tiny_catalog(2, 3);
  cat.interactions = {{1, 1, 4, 5}};
  const auto s = chronological_split(cat);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("user 2"), std::string::npos);
}

TEST(ChronologicalSplit, RejectsBadRatios) {
  const auto cat = tiny_catalog(1, 1);
  EXPECT_THROW(chronological_split(cat, SplitRatios{0.5, 0.2, 0.2}), Error);
  EXPECT_THROW(chronological_split(cat, SplitRatios{1.0, 0.0, 0.0}), Error);
}

TEST(SplitCounts, FloorsThenFillsTrainFirst) {
  for (std::size_t n = 0; n <= 200; ++n) {
    const auto c = split_counts(n, {});
    EXPECT_EQ(c[0] + c[1] + c[2], n);
    if (n >= 1) {
      EXPECT_GE(c[0], 1u);
    }
    EXPECT_GE(c[0], static_cast<std::size_t>(std::floor(0.7 * n + 1e-9)));
    EXPECT_LE(c[2], static_cast<std::size_t>(std::floor(0.1 * n + 1e-9)));
  }
}

// Property: on generated catalogs the split partitions the interactions and
// respects per-user chronology.
TEST(ChronologicalSplit, PartitionAndChronologyProperty) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto cat = generate_synthetic(SyntheticSpec{40, 60, 6, 900}, seed).catalog;
    const auto s = chronological_split(cat);
    std::vector<std::tuple<UserId, MovieId, std::int64_t>> all, parts;
    for (const auto& i : cat.interactions) all.emplace_back(i.user_id, i.movie_id, i.timestamp);
    for (const auto* set : {&s.train, &s.valid, &s.test}) {
      for (const auto& i : *set) parts.emplace_back(i.user_id, i.movie_id, i.timestamp);
    }
    std::sort(all.begin(), all.end());
    std::sort(parts.begin(), parts.end());
    EXPECT_EQ(all, parts);

    std::map<UserId, std::array<std::int64_t, 3>> min_t, max_t;
    auto track = [&](const std::vector<Interaction>& v, int slot) {
      for (const auto& i : v) {
        auto& lo = min_t.try_emplace(i.user_id, std::array<std::int64_t, 3>{INT64_MAX, INT64_MAX, INT64_MAX}).first->second;
        auto& hi = max_t.try_emplace(i.user_id, std::array<std::int64_t, 3>{INT64_MIN, INT64_MIN, INT64_MIN}).first->second;
        lo[slot] = std::min(lo[slot], i.timestamp);
        hi[slot] = std::max(hi[slot], i.timestamp);
      }
    };
    track(s.train, 0);
    track(s.valid, 1);
    track(s.test, 2);
    for (const auto& [u, hi] : max_t) {
      const auto& lo = min_t.at(u);
      if (lo[1] != INT64_MAX) {
        EXPECT_LE(hi[0], lo[1]);
      }
      if (lo[2] != INT64_MAX) {
        EXPECT_LE(hi[0], lo[2]);
        if (lo[1] != INT64_MAX) {
          EXPECT_LE(hi[1], lo[2]);
        }
      }
    }
  }
}

TEST(TrainPrefix, KeepsOldestCeilFractionPerUser) {
  std::vector<Interaction> train;
  for (int i = 0; i < 10; ++i) train.push_back({1, i + 1, 3, 100 - i});
  train.push_back({2, 1, 3, 5});
  const auto half = train_prefix(train, 0.5);
  ASSERT_EQ(half.size(), 6u);  // 5 of user 1, 1 of user 2 (minimum one)
  for (int i = 0; i < 5; ++i) EXPECT_EQ(half[static_cast<std::size_t>(i)].movie_id, 10 - i);
  EXPECT_EQ(train_prefix(train, 0.75).size(), 8u + 1u);
  EXPECT_EQ(train_prefix(train, 1.0).size(), train.size());
}

TEST(GenerateSynthetic, SameSeedIsByteIdentical) {
  const auto a = generate_synthetic({}, 7);
  const auto b = generate_synthetic({}, 7);
  EXPECT_EQ(a.catalog, b.catalog);
  TempDir da, db;
  write_catalog(a.catalog, da.path());
  write_catalog(b.catalog, db.path());
  for (const char* f : {"movies.dat", "users.dat", "ratings.dat", "metadata.jsonl"}) {
    EXPECT_EQ(read_text(da / f), read_text(db / f)) << f;
  }
  EXPECT_NE(generate_synthetic({}, 8).catalog, a.catalog);
}

TEST(GenerateSynthetic, HonoursRequestedShape) {
  const auto s = generate_synthetic({}, 1);
  EXPECT_EQ(s.catalog.users.size(), 200u);
  EXPECT_EQ(s.catalog.movies.size(), 300u);
  EXPECT_EQ(s.catalog.interactions.size(), 6000u);
  EXPECT_EQ(s.genre_vocabulary.size(), 8u);
  const auto r = validate_stats(s.catalog);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_DOUBLE_EQ(r.sparsity, 6000.0 / 60000.0);
  for (const auto& [u, list] : s.catalog.by_user()) {
    std::set<MovieId> distinct;
    for (const auto& i : list) distinct.insert(i.movie_id);
    EXPECT_EQ(distinct.size(), list.size()) << "user " << u << " rated a movie twice";
  }
}

TEST(GenerateSynthetic, RejectsImpossibleInteractionCount) {
  SyntheticSpec spec{5, 5, 2, 26};
  try {
    generate_synthetic(spec, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
  spec.interactions = 25;
  EXPECT_EQ(generate_synthetic(spec, 1).catalog.interactions.size(), 25u);
}

TEST(GenerateSynthetic, SingleGenreGivesIdenticalAffinity) {
  SyntheticSpec spec;
  spec.genres = 1;
  const auto s = generate_synthetic(spec, 4);
  for (const auto& [u, a] : s.affinity) {
    ASSERT_EQ(a.size(), 1u);
    EXPECT_DOUBLE_EQ(a[0], 1.0);
  }
  for (const auto& [_, m] : s.catalog.movies) EXPECT_EQ(m.genres, (std::vector<std::string>{"Action"}));
}

// Ratings must carry the generator's taste signal: within each user, the
// genre they like most is rated higher than the one they like least.
TEST(GenerateSynthetic, TopAffinityGenreOutratesBottom) {
  const auto s = generate_synthetic({}, 11);
  const auto& vocab = s.genre_vocabulary;
  int users = 0, agree = 0;
  double gap = 0.0;
  for (const auto& [uid, list] : s.catalog.by_user()) {
    const auto& a = s.affinity.at(uid);
    const auto top = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
    const auto bottom = static_cast<std::size_t>(std::min_element(a.begin(), a.end()) - a.begin());
    double st = 0, sb = 0;
    int nt = 0, nb = 0;
    for (const auto& it : list) {
      const auto& g = s.catalog.movie(it.movie_id).genres;
      if (std::find(g.begin(), g.end(), vocab[top]) != g.end()) st += it.rating, ++nt;
      if (std::find(g.begin(), g.end(), vocab[bottom]) != g.end()) sb += it.rating, ++nb;
    }
    if (nt == 0 || nb == 0) continue;
    ++users;
    gap += st / nt - sb / nb;
    agree += st / nt > sb / nb;
  }
  ASSERT_GT(users, 30);
  EXPECT_GT(gap / users, 0.5);
  EXPECT_GT(static_cast<double>(agree) / users, 0.75);
}

TEST(GenerateSynthetic, PosterRefEncodesStyleSigns) {
  const auto s = generate_synthetic(SyntheticSpec{5, 20, 4, 50}, 2);
  for (const auto& [id, m] : s.catalog.movies) {
    ASSERT_TRUE(m.poster_ref);
    const auto parts = split(*m.poster_ref, "_");
    ASSERT_EQ(parts.size(), 5u);
    EXPECT_EQ(parts[0], std::to_string(id));
    EXPECT_EQ(parts[1], s.style.at(id)[0] >= 0 ? "warm" : "cool");
    EXPECT_EQ(parts[2], s.style.at(id)[1] >= 0 ? "bright" : "dark");
  }
}

TEST(Date, ParsesAndOrders) {
  const auto d = Date::parse("1995-07-14");
  EXPECT_EQ(d.iso(), "1995-07-14");
  EXPECT_LT(Date::parse("1995-07-13"), d);
  EXPECT_THROW(Date::parse("1995-13-01"), Error);
  EXPECT_THROW(Date::parse("July 1995"), Error);
}

}  // namespace
}  // namespace absim
