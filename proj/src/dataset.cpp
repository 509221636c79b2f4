#include "simuser/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "simuser/error.hpp"

namespace simuser {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <typename Int>
bool parse_int(const std::string& s, Int& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

struct TableReader {
  std::ifstream in;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  char delim;

  TableReader(const std::filesystem::path& path, char d) : in(path), delim(d) {
    if (!std::filesystem::exists(path) || !in) {
      throw IOError("cannot open " + path.string());
    }
    std::string line;
    if (!next_line(line)) throw ParseError("missing header row in " + path.string(), 1);
    for (auto& f : split_fields(line, delim)) header.push_back(trim(f));
  }

  bool next_line(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (!trim(line).empty()) return true;
    }
    return false;
  }

  int column(std::string_view name, bool required, const std::filesystem::path& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    if (required) {
      throw ParseError("missing column '" + std::string(name) + "' in " + path.string(), 1);
    }
    return -1;
  }
};

void check_writable(const std::string& field, const TextFormat& fmt) {
  if (field.find(fmt.delimiter) != std::string::npos || field.find('\n') != std::string::npos) {
    throw ValidationError("field contains the delimiter or a newline: " + field);
  }
}

}  // namespace

bool time_order_less(const Interaction& a, const Interaction& b) {
  return std::tie(a.timestamp, a.user_id, a.item_id) < std::tie(b.timestamp, b.user_id, b.item_id);
}

ItemTable::ItemTable(std::vector<Item> items) : items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!index_.emplace(items_[i].id, i).second) {
      throw ValidationError("duplicate item_id " + items_[i].id);
    }
  }
}

const Item& ItemTable::at(const ItemId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown item " + id);
  return items_[it->second];
}

const Item* ItemTable::find(const ItemId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::vector<UserId> InteractionDataset::users() const {
  std::set<UserId> ids;
  for (const auto& r : interactions) ids.insert(r.user_id);
  return {ids.begin(), ids.end()};
}

std::vector<Interaction> load_ratings(const std::filesystem::path& path, const TextFormat& fmt) {
  TableReader reader(path, fmt.delimiter);
  const int c_user = reader.column("user_id", true, path);
  const int c_item = reader.column("item_id", true, path);
  const int c_rating = reader.column("rating", true, path);
  const int c_ts = reader.column("timestamp", true, path);

  std::vector<Interaction> rows;
  std::set<std::tuple<UserId, ItemId, std::int64_t>> seen;
  std::string line;
  while (reader.next_line(line)) {
    auto f = split_fields(line, fmt.delimiter);
    if (f.size() != reader.header.size()) {
      throw ParseError("expected " + std::to_string(reader.header.size()) + " fields, got " +
                           std::to_string(f.size()),
                       reader.line_no);
    }
    Interaction r;
    r.user_id = trim(f[c_user]);
    r.item_id = trim(f[c_item]);
    if (r.user_id.empty() || r.item_id.empty()) {
      throw ParseError("empty user_id or item_id", reader.line_no);
    }
    if (!parse_int(trim(f[c_rating]), r.rating)) {
      throw ParseError("rating is not an integer: '" + f[c_rating] + "'", reader.line_no);
    }
    if (!parse_int(trim(f[c_ts]), r.timestamp)) {
      throw ParseError("timestamp is not an integer: '" + f[c_ts] + "'", reader.line_no);
    }
    if (r.rating < 1 || r.rating > 5) {
      throw ValidationError("rating " + std::to_string(r.rating) + " outside 1..5 at line " +
                            std::to_string(reader.line_no));
    }
    if (!seen.emplace(r.user_id, r.item_id, r.timestamp).second) {
      throw ValidationError("duplicate (user, item, timestamp) at line " +
                            std::to_string(reader.line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

ItemTable load_items(const std::filesystem::path& path, const TextFormat& fmt) {
  TableReader reader(path, fmt.delimiter);
  const int c_id = reader.column("item_id", true, path);
  const int c_title = reader.column("title", true, path);
  const int c_genres = reader.column("genres", true, path);
  const int c_desc = reader.column("description", false, path);
  int c_thumb = reader.column("thumbnail", false, path);
  if (c_thumb < 0) c_thumb = reader.column("thumbnail_ref", false, path);
  const int c_reviews = reader.column("review_count", false, path);
  const int c_pos = reader.column("positive_review", false, path);
  const int c_neg = reader.column("negative_review", false, path);

  auto optional_text = [](const std::vector<std::string>& f, int col) -> std::optional<std::string> {
    if (col < 0) return std::nullopt;
    std::string v = trim(f[col]);
    if (v.empty()) return std::nullopt;
    return v;
  };

  std::vector<Item> items;
  std::string line;
  while (reader.next_line(line)) {
    auto f = split_fields(line, fmt.delimiter);
    if (f.size() != reader.header.size()) {
      throw ParseError("expected " + std::to_string(reader.header.size()) + " fields, got " +
                           std::to_string(f.size()),
                       reader.line_no);
    }
    Item item;
    item.id = trim(f[c_id]);
    if (item.id.empty()) throw ParseError("empty item_id", reader.line_no);
    item.title = trim(f[c_title]);
    for (auto& g : split_fields(f[c_genres], fmt.list_separator)) {
      g = trim(g);
      if (!g.empty()) item.genres.push_back(std::move(g));
    }
    item.description = optional_text(f, c_desc);
    item.thumbnail_ref = optional_text(f, c_thumb);
    if (auto rc = optional_text(f, c_reviews)) {
      int n = 0;
      if (!parse_int(*rc, n) || n < 0) {
        throw ParseError("review_count is not a non-negative integer: '" + *rc + "'",
                         reader.line_no);
      }
      item.review_count = n;
    }
    item.positive_review = optional_text(f, c_pos);
    item.negative_review = optional_text(f, c_neg);
    items.push_back(std::move(item));
  }
  return ItemTable(std::move(items));
}

InteractionDataset load_dataset(const std::filesystem::path& ratings_path,
                                const std::filesystem::path& items_path, const TextFormat& fmt) {
  InteractionDataset ds;
  ds.items = load_items(items_path, fmt);
  ds.interactions = load_ratings(ratings_path, fmt);
  for (const auto& r : ds.interactions) {
    if (!ds.items.contains(r.item_id)) {
      throw ValidationError("rating references item '" + r.item_id + "' missing from items file");
    }
  }
  return ds;
}

void write_ratings(const std::filesystem::path& path, std::span<const Interaction> rows,
                   const TextFormat& fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write " + path.string());
  const char d = fmt.delimiter;
  out << "user_id" << d << "item_id" << d << "rating" << d << "timestamp" << '\n';
  for (const auto& r : rows) {
    check_writable(r.user_id, fmt);
    check_writable(r.item_id, fmt);
    out << r.user_id << d << r.item_id << d << r.rating << d << r.timestamp << '\n';
  }
}

void write_items(const std::filesystem::path& path, const ItemTable& items, const TextFormat& fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write " + path.string());
  const char d = fmt.delimiter;
  out << "item_id" << d << "title" << d << "genres" << d << "description" << d << "thumbnail" << d
      << "review_count" << d << "positive_review" << d << "negative_review" << '\n';
  for (const auto& item : items.items()) {
    std::string genres;
    for (std::size_t i = 0; i < item.genres.size(); ++i) {
      if (item.genres[i].find(fmt.list_separator) != std::string::npos) {
        throw ValidationError("genre contains the list separator: " + item.genres[i]);
      }
      if (i) genres.push_back(fmt.list_separator);
      genres += item.genres[i];
    }
    const std::string review_count = item.review_count ? std::to_string(*item.review_count) : "";
    for (const std::string& field : {item.id, item.title, genres, review_count}) {
      check_writable(field, fmt);
    }
    auto opt = [&](const std::optional<std::string>& v) {
      if (v) check_writable(*v, fmt);
      return v.value_or("");
    };
    out << item.id << d << item.title << d << genres << d << opt(item.description) << d
        << opt(item.thumbnail_ref) << d << review_count << d << opt(item.positive_review) << d
        << opt(item.negative_review) << '\n';
  }
}

DatasetSplit time_split(std::span<const Interaction> interactions, const SplitFractions& fractions) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = interactions.size();
  if (n < 10) {
    throw InsufficientDataError("time_split needs at least 10 interactions, got " +
                                std::to_string(n));
  }
  std::vector<Interaction> sorted(interactions.begin(), interactions.end());
  std::stable_sort(sorted.begin(), sorted.end(), time_order_less);

  // The epsilon absorbs representation error such as 0.8 * 10 = 8.000000000000002.
  const auto n_train = static_cast<std::size_t>(std::floor(fractions.train * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.validation * n + 1e-9));

  DatasetSplit split;
  auto first = sorted.begin();
  split.train.assign(first, first + n_train);
  split.validation.assign(first + n_train, first + n_train + n_val);
  split.test.assign(first + n_train + n_val, sorted.end());
  return split;
}

std::vector<Interaction> latest_per_pair(std::span<const Interaction> interactions) {
  std::map<std::pair<UserId, ItemId>, const Interaction*> latest;
  for (const auto& r : interactions) {
    auto& slot = latest[{r.user_id, r.item_id}];
    if (slot == nullptr || slot->timestamp < r.timestamp) slot = &r;
  }
  std::vector<Interaction> out;
  out.reserve(latest.size());
  for (const auto& [key, r] : latest) out.push_back(*r);
  return out;
}

double aggregated_rating(std::span<const Interaction> interactions, const ItemId& item_id) {
  std::map<UserId, const Interaction*> latest;
  for (const auto& r : interactions) {
    if (r.item_id != item_id) continue;
    auto& slot = latest[r.user_id];
    if (slot == nullptr || slot->timestamp < r.timestamp) slot = &r;
  }
  if (latest.empty()) throw UndefinedAggregateError("item " + item_id + " has no ratings");
  double sum = 0.0;
  for (const auto& [user, r] : latest) sum += r->rating;
  return sum / static_cast<double>(latest.size());
}

std::unordered_map<ItemId, double> aggregated_ratings(std::span<const Interaction> interactions) {
  std::unordered_map<ItemId, std::pair<double, std::size_t>> acc;
  for (const auto& r : latest_per_pair(interactions)) {
    auto& a = acc[r.item_id];
    a.first += r.rating;
    a.second += 1;
  }
  std::unordered_map<ItemId, double> out;
  for (const auto& [id, a] : acc) out.emplace(id, a.first / static_cast<double>(a.second));
  return out;
}

double user_average_rating(std::span<const Interaction> user_history) {
  if (user_history.empty()) throw UndefinedAggregateError("empty rating history");
  double sum = 0.0;
  for (const auto& r : user_history) sum += r.rating;
  return sum / static_cast<double>(user_history.size());
}

std::map<UserId, std::vector<Interaction>> group_by_user(std::span<const Interaction> interactions) {
  std::map<UserId, std::vector<Interaction>> out;
  for (const auto& r : interactions) out[r.user_id].push_back(r);
  for (auto& [user, rows] : out) std::stable_sort(rows.begin(), rows.end(), time_order_less);
  return out;
}

}  // namespace simuser
