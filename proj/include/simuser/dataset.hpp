#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace simuser {

using UserId = std::string;
using ItemId = std::string;

struct Item {
  ItemId id;
  std::string title;
  std::vector<std::string> genres;
  std::optional<std::string> description;
  std::optional<std::string> thumbnail_ref;
  std::optional<int> review_count;
  // One sample comment of each polarity, shown by the review-influence study.
  std::optional<std::string> positive_review;
  std::optional<std::string> negative_review;

  bool operator==(const Item&) const = default;
};

struct Interaction {
  UserId user_id;
  ItemId item_id;
  int rating = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

// (timestamp, user_id, item_id) lexicographic order; the boundary tie-break
// for time-based splits.
bool time_order_less(const Interaction& a, const Interaction& b);

class ItemTable {
 public:
  ItemTable() = default;
  explicit ItemTable(std::vector<Item> items);

  const std::vector<Item>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool contains(const ItemId& id) const { return index_.count(id) != 0; }
  const Item& at(const ItemId& id) const;
  const Item* find(const ItemId& id) const;

 private:
  std::vector<Item> items_;
  std::unordered_map<ItemId, std::size_t> index_;
};

struct InteractionDataset {
  ItemTable items;
  std::vector<Interaction> interactions;

  // Users in first-appearance order of the sorted user id set.
  std::vector<UserId> users() const;
};

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct TextFormat {
  char delimiter = '\t';
  // Separator inside the genres column.
  char list_separator = '|';
};

// Ratings file: header row with columns user_id, item_id, rating, timestamp
// (any order). Throws IOError, ParseError, ValidationError.
std::vector<Interaction> load_ratings(const std::filesystem::path& path,
                                      const TextFormat& fmt = {});
// Items file: header row with item_id, title, genres and optional
// description, thumbnail, review_count, positive_review, negative_review.
ItemTable load_items(const std::filesystem::path& path, const TextFormat& fmt = {});

// Loads both files and rejects ratings that reference unknown items.
InteractionDataset load_dataset(const std::filesystem::path& ratings_path,
                                const std::filesystem::path& items_path,
                                const TextFormat& fmt = {});

void write_ratings(const std::filesystem::path& path, std::span<const Interaction> rows,
                   const TextFormat& fmt = {});
void write_items(const std::filesystem::path& path, const ItemTable& items,
                 const TextFormat& fmt = {});

// Sort by time_order_less, then slice floor(f_train*N) / floor(f_val*N) / rest.
// Throws InsufficientDataError when N < 10, ValidationError on bad fractions.
DatasetSplit time_split(std::span<const Interaction> interactions,
                        const SplitFractions& fractions = {});

// Keeps the most recent rating for every (user, item) pair.
std::vector<Interaction> latest_per_pair(std::span<const Interaction> interactions);

// R_i: mean rating of item_id over users that rated it (duplicates resolved
// to the most recent). Throws UndefinedAggregateError when nobody rated it.
double aggregated_rating(std::span<const Interaction> interactions, const ItemId& item_id);

// R_i for every rated item in one pass.
std::unordered_map<ItemId, double> aggregated_ratings(std::span<const Interaction> interactions);

// R-bar: arithmetic mean of the given ratings. Throws UndefinedAggregateError on empty input.
double user_average_rating(std::span<const Interaction> user_history);

// Interactions grouped by user, each group in time order.
std::map<UserId, std::vector<Interaction>> group_by_user(std::span<const Interaction> interactions);

}  // namespace simuser
