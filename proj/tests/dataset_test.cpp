#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "simuser/dataset.hpp"
#include "simuser/error.hpp"
#include "simuser/rng.hpp"

namespace fs = std::filesystem;
using namespace simuser;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("simuser_dataset_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const fs::path kFixture = fs::path(SIMUSER_TEST_DATA) / "ml100";

// Counts data lines without going through the loader.
std::size_t count_data_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (!line.empty()) ++n;
  }
  return n;
}

std::vector<Interaction> make_rows(std::size_t n, std::int64_t ts_step) {
  std::vector<Interaction> rows;
  for (std::size_t k = 0; k < n; ++k) {
    rows.push_back({"u" + std::to_string(k % 3), "i" + std::to_string(k), 3,
                    static_cast<std::int64_t>(1000 + ts_step * static_cast<std::int64_t>(k))});
  }
  return rows;
}

}  // namespace

TEST(LoadDataset, ParsesSmallFiles) {
  auto dir = temp_dir("small");
  write_file(dir / "r.tsv",
             "user_id\titem_id\trating\ttimestamp\nu1\ti1\t5\t10\nu1\ti2\t3\t11\nu2\ti1\t4\t12\n");
  write_file(dir / "i.tsv", "item_id\ttitle\tgenres\ni1\tAlpha\tAction|Drama\ni2\tBeta\tComedy\n");
  auto ds = load_dataset(dir / "r.tsv", dir / "i.tsv");
  EXPECT_EQ(ds.interactions.size(), 3u);
  EXPECT_EQ(ds.items.size(), 2u);
  EXPECT_EQ(ds.items.at("i1").genres, (std::vector<std::string>{"Action", "Drama"}));
  EXPECT_FALSE(ds.items.at("i1").thumbnail_ref.has_value());
}

TEST(LoadDataset, RejectsRatingOutOfRange) {
  auto dir = temp_dir("range");
  write_file(dir / "r.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti1\t6\t10\n");
  write_file(dir / "i.tsv", "item_id\ttitle\tgenres\ni1\tAlpha\tAction\n");
  EXPECT_THROW(load_dataset(dir / "r.tsv", dir / "i.tsv"), ValidationError);
}

TEST(LoadDataset, MalformedRowCarriesLineNumber) {
  auto dir = temp_dir("malformed");
  write_file(dir / "r.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti1\t5\t10\nu1\ti1\tfive\t11\n");
  try {
    load_ratings(dir / "r.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_file(dir / "r2.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti1\t5\n");
  EXPECT_THROW(load_ratings(dir / "r2.tsv"), ParseError);
}

TEST(LoadDataset, MissingFileAndUnknownItem) {
  auto dir = temp_dir("missing");
  EXPECT_THROW(load_ratings(dir / "nope.tsv"), IOError);
  write_file(dir / "r.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti9\t5\t10\n");
  write_file(dir / "i.tsv", "item_id\ttitle\tgenres\ni1\tAlpha\tAction\n");
  EXPECT_THROW(load_dataset(dir / "r.tsv", dir / "i.tsv"), ValidationError);
}

TEST(LoadDataset, DuplicatePairNeedsDistinctTimestamps) {
  auto dir = temp_dir("dup");
  write_file(dir / "r.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti1\t5\t10\nu1\ti1\t2\t10\n");
  EXPECT_THROW(load_ratings(dir / "r.tsv"), ValidationError);
  write_file(dir / "r2.tsv", "user_id\titem_id\trating\ttimestamp\nu1\ti1\t5\t10\nu1\ti1\t2\t11\n");
  EXPECT_EQ(load_ratings(dir / "r2.tsv").size(), 2u);
}

TEST(LoadDataset, FixtureCountsMatchLineCounter) {
  auto ds = load_dataset(kFixture / "ratings.tsv", kFixture / "items.tsv");
  EXPECT_EQ(ds.interactions.size(), count_data_lines(kFixture / "ratings.tsv"));
  EXPECT_EQ(ds.items.size(), count_data_lines(kFixture / "items.tsv"));
  EXPECT_EQ(ds.interactions.size(), 100u);
}

TEST(LoadDataset, RoundTripIsStable) {
  // Property: parse -> serialize -> parse yields the same dataset.
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto dir = temp_dir("roundtrip" + std::to_string(trial));
    std::vector<Item> items;
    const std::size_t n_items = 1 + rng.index(8);
    for (std::size_t i = 0; i < n_items; ++i) {
      Item it;
      it.id = "i" + std::to_string(i);
      it.title = "Title " + std::to_string(rng.index(1000));
      it.genres = {"G" + std::to_string(rng.index(4))};
      if (rng.index(2)) it.genres.push_back("H" + std::to_string(rng.index(4)));
      if (rng.index(2)) it.thumbnail_ref = "t/" + it.id + ".png";
      if (rng.index(2)) it.review_count = static_cast<int>(rng.index(50));
      if (rng.index(2)) it.description = "desc " + it.id;
      items.push_back(it);
    }
    std::vector<Interaction> rows;
    for (std::size_t k = 0; k < 1 + rng.index(30); ++k) {
      rows.push_back({"u" + std::to_string(rng.index(5)), items[rng.index(n_items)].id,
                      1 + static_cast<int>(rng.index(5)), static_cast<std::int64_t>(k)});
    }
    write_items(dir / "i.tsv", ItemTable(items));
    write_ratings(dir / "r.tsv", rows);
    auto first = load_dataset(dir / "r.tsv", dir / "i.tsv");
    write_items(dir / "i2.tsv", first.items);
    write_ratings(dir / "r2.tsv", first.interactions);
    auto second = load_dataset(dir / "r2.tsv", dir / "i2.tsv");
    EXPECT_EQ(first.interactions, second.interactions);
    EXPECT_EQ(first.items.items(), second.items.items());
    EXPECT_EQ(first.items.items(), items);
    EXPECT_EQ(first.interactions, rows);
  }
}

TEST(TimeSplit, TenDistinctTimestamps) {
  auto rows = make_rows(10, 5);
  auto split = time_split(rows);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.validation.size(), 1u);
  EXPECT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0].timestamp, rows.back().timestamp);
}

TEST(TimeSplit, EqualTimestampsUseTieBreakOrder) {
  auto rows = make_rows(10, 0);
  Rng rng(3);
  rng.shuffle(rows);
  auto split = time_split(rows);
  ASSERT_EQ(split.train.size(), 8u);
  ASSERT_EQ(split.validation.size(), 1u);
  ASSERT_EQ(split.test.size(), 1u);
  // Sort-then-slice oracle on (timestamp, user, item).
  auto oracle = rows;
  std::sort(oracle.begin(), oracle.end(), [](const Interaction& a, const Interaction& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.item_id < b.item_id;
  });
  EXPECT_EQ(split.train, std::vector<Interaction>(oracle.begin(), oracle.begin() + 8));
  EXPECT_EQ(split.validation[0], oracle[8]);
  EXPECT_EQ(split.test[0], oracle[9]);
}

TEST(TimeSplit, Preconditions) {
  EXPECT_THROW(time_split(make_rows(5, 1)), InsufficientDataError);
  EXPECT_THROW(time_split(make_rows(20, 1), {0.5, 0.1, 0.1}), ValidationError);
}

TEST(TimeSplit, FixtureInvariants) {
  auto ds = load_dataset(kFixture / "ratings.tsv", kFixture / "items.tsv");
  auto split = time_split(ds.interactions);
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.validation.size(), 10u);
  EXPECT_EQ(split.test.size(), 10u);
  auto max_ts = [](const std::vector<Interaction>& v) {
    std::int64_t m = INT64_MIN;
    for (auto& r : v) m = std::max(m, r.timestamp);
    return m;
  };
  auto min_ts = [](const std::vector<Interaction>& v) {
    std::int64_t m = INT64_MAX;
    for (auto& r : v) m = std::min(m, r.timestamp);
    return m;
  };
  EXPECT_LE(max_ts(split.train), min_ts(split.validation));
  EXPECT_LE(max_ts(split.validation), min_ts(split.test));
  std::set<std::tuple<std::string, std::string, std::int64_t>> held;
  for (auto& r : split.test) held.emplace(r.user_id, r.item_id, r.timestamp);
  for (auto* part : {&split.train, &split.validation}) {
    for (auto& r : *part) EXPECT_EQ(held.count({r.user_id, r.item_id, r.timestamp}), 0u);
  }
}

TEST(Aggregates, ItemMean) {
  std::vector<Interaction> rows{{"a", "x", 4, 1}, {"b", "x", 5, 2}, {"c", "x", 3, 3}, {"a", "y", 5, 4}};
  EXPECT_DOUBLE_EQ(aggregated_rating(rows, "x"), 4.0);
  EXPECT_DOUBLE_EQ(aggregated_rating(rows, "y"), 5.0);
  EXPECT_THROW(aggregated_rating(rows, "z"), UndefinedAggregateError);
}

TEST(Aggregates, ItemMeanKeepsMostRecentDuplicate) {
  std::vector<Interaction> rows{{"a", "x", 1, 1}, {"a", "x", 5, 9}, {"b", "x", 3, 3}};
  EXPECT_DOUBLE_EQ(aggregated_rating(rows, "x"), 4.0);
  EXPECT_DOUBLE_EQ(aggregated_ratings(rows).at("x"), 4.0);
}

TEST(Aggregates, ItemMeanPermutationInvariant) {
  Rng rng(5);
  std::vector<Interaction> rows;
  for (int k = 0; k < 40; ++k) {
    rows.push_back({"u" + std::to_string(k), "i" + std::to_string(k % 4),
                    1 + static_cast<int>(rng.index(5)), k});
  }
  const double base = aggregated_rating(rows, "i2");
  for (int t = 0; t < 10; ++t) {
    rng.shuffle(rows);
    EXPECT_DOUBLE_EQ(aggregated_rating(rows, "i2"), base);
  }
}

TEST(Aggregates, UserAverage) {
  std::vector<Interaction> h{{"u", "a", 5, 1}, {"u", "b", 4, 2}, {"u", "c", 5, 3}};
  EXPECT_NEAR(user_average_rating(h), 4.667, 1e-3);
  EXPECT_DOUBLE_EQ(user_average_rating(std::vector<Interaction>{{"u", "a", 1, 1}}), 1.0);
  EXPECT_THROW(user_average_rating(std::vector<Interaction>{}), UndefinedAggregateError);

  Rng rng(8);
  std::vector<Interaction> fifty;
  long sum = 0;
  for (int k = 0; k < 50; ++k) {
    int r = 1 + static_cast<int>(rng.index(5));
    sum += r;
    fifty.push_back({"u", "i" + std::to_string(k), r, k});
  }
  EXPECT_NEAR(user_average_rating(fifty), static_cast<double>(sum) / 50.0, 1e-12);
}
