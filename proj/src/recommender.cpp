#include "simuser/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "simuser/error.hpp"
#include "simuser/rng.hpp"

namespace simuser {

namespace {

std::vector<ItemId> catalog_ids(const ItemTable& items) {
  std::vector<ItemId> ids;
  for (const auto& it : items.items()) ids.push_back(it.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ItemId> take_unseen(const std::vector<ItemId>& ordered, std::size_t n,
                                const std::set<ItemId>& exclude, const std::string& who) {
  std::vector<ItemId> out;
  for (const auto& id : ordered) {
    if (out.size() == n) break;
    if (!exclude.count(id)) out.push_back(id);
  }
  if (out.size() < n) spdlog::info("{}: catalog exhausted, page has {} of {} items", who, out.size(), n);
  return out;
}

double dot(const double* a, const double* b, std::size_t k) {
  double s = 0;
  for (std::size_t f = 0; f < k; ++f) s += a[f] * b[f];
  return s;
}

}  // namespace

RandomRecommender::RandomRecommender(const ItemTable& items, std::uint64_t seed)
    : RandomRecommender(catalog_ids(items), seed) {}

RandomRecommender::RandomRecommender(std::vector<ItemId> catalog, std::uint64_t seed)
    : catalog_(std::move(catalog)), seed_(seed) {
  std::sort(catalog_.begin(), catalog_.end());
}

std::vector<ItemId> RandomRecommender::recommend(const UserId& user, int page, std::size_t n,
                                                 const std::set<ItemId>& exclude) const {
  std::vector<ItemId> order = catalog_;
  Rng rng(derive_seed(seed_, "random:" + user + ":" + std::to_string(page)));
  rng.shuffle(order);
  return take_unseen(order, n, exclude, id());
}

PopRecommender::PopRecommender(const ItemTable& items, std::span<const Interaction> train) {
  std::map<ItemId, std::size_t> counts;
  for (const auto& r : train) ++counts[r.item_id];
  ranking_ = catalog_ids(items);
  std::stable_sort(ranking_.begin(), ranking_.end(), [&](const ItemId& a, const ItemId& b) {
    const auto ca = counts.count(a) ? counts.at(a) : 0;
    const auto cb = counts.count(b) ? counts.at(b) : 0;
    return ca > cb;
  });
}

std::vector<ItemId> PopRecommender::recommend(const UserId&, int, std::size_t n,
                                              const std::set<ItemId>& exclude) const {
  return take_unseen(ranking_, n, exclude, id());
}

double MfModel::predict(const UserId& u, const ItemId& i) const {
  const auto uu = users_.find(u);
  const auto ii = items_.find(i);
  if (uu == users_.end() || ii == items_.end()) return mean_;
  return dot(&p_[uu->second * rank_], &q_[ii->second * rank_], rank_);
}

std::span<const double> MfModel::user_factors(const UserId& u) const {
  const auto it = users_.find(u);
  if (it == users_.end()) throw ValidationError("unknown user " + u);
  return {p_.data() + it->second * rank_, rank_};
}

std::span<const double> MfModel::item_factors(const ItemId& i) const {
  const auto it = items_.find(i);
  if (it == items_.end()) throw ValidationError("unknown item " + i);
  return {q_.data() + it->second * rank_, rank_};
}

double MfModel::rmse(std::span<const Interaction> rows) const {
  if (rows.empty()) throw EmptyReportError("rmse of no rows");
  double s = 0;
  for (const auto& r : rows) {
    const double e = r.rating - predict(r.user_id, r.item_id);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(rows.size()));
}

MfModel train_mf(std::span<const Interaction> train, const MfParams& params) {
  if (train.empty()) throw ValidationError("cannot train MF on an empty split");
  if (params.rank == 0) throw ValidationError("MF rank must be positive");
  const auto rows = latest_per_pair(train);

  MfModel m;
  m.rank_ = params.rank;
  for (const auto& r : rows) {
    m.users_.try_emplace(r.user_id, m.users_.size());
    m.items_.try_emplace(r.item_id, m.items_.size());
    m.mean_ += r.rating;
  }
  m.mean_ /= static_cast<double>(rows.size());

  const std::size_t k = params.rank;
  Rng rng(params.seed);
  const double base = std::sqrt(std::max(m.mean_, 0.0) / static_cast<double>(k));
  auto init = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n * k);
    for (auto& x : v) x = base + params.init_scale * (2.0 * rng.unit() - 1.0);
  };
  init(m.p_, m.users_.size());
  init(m.q_, m.items_.size());

  struct Row {
    std::size_t u, i;
    double r;
  };
  std::vector<Row> data;
  for (const auto& r : rows) data.push_back({m.users_.at(r.user_id), m.items_.at(r.item_id), double(r.rating)});

  auto objective = [&] {
    double s = 0;
    for (const auto& d : data) {
      const double* pu = &m.p_[d.u * k];
      const double* qi = &m.q_[d.i * k];
      const double e = d.r - dot(pu, qi, k);
      s += e * e + params.regularization * (dot(pu, pu, k) + dot(qi, qi, k));
    }
    return s / static_cast<double>(data.size());
  };

  m.loss_.push_back(objective());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (const auto idx : order) {
      const auto& d = data[idx];
      double* pu = &m.p_[d.u * k];
      double* qi = &m.q_[d.i * k];
      const double e = d.r - dot(pu, qi, k);
      for (std::size_t f = 0; f < k; ++f) {
        const double p = pu[f];
        pu[f] += params.learning_rate * (e * qi[f] - params.regularization * p);
        qi[f] += params.learning_rate * (e * p - params.regularization * qi[f]);
      }
    }
    const double loss = objective();
    m.loss_.push_back(loss);
    if (!std::isfinite(loss) || loss > 10.0 * m.loss_.front()) {
      throw TrainingDivergedError("MF diverged at epoch " + std::to_string(epoch + 1) +
                                  " (loss " + std::to_string(loss) + ")");
    }
  }
  return m;
}

MfRecommender::MfRecommender(const ItemTable& items, std::shared_ptr<const MfModel> model)
    : catalog_(catalog_ids(items)), model_(std::move(model)) {}

std::vector<ItemId> MfRecommender::recommend(const UserId& user, int, std::size_t n,
                                             const std::set<ItemId>& exclude) const {
  std::vector<std::pair<double, const ItemId*>> scored;
  for (const auto& id : catalog_) {
    if (!exclude.count(id)) scored.emplace_back(model_->predict(user, id), &id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<ItemId> ordered;
  for (const auto& [s, id] : scored) ordered.push_back(*id);
  return take_unseen(ordered, n, {}, this->id());
}

namespace {
std::vector<ItemId> with_genres(const ItemTable& items, const std::vector<std::string>& genres) {
  if (genres.empty()) throw ValidationError("a genre-restricted recommender needs genres");
  std::vector<ItemId> ids;
  for (const auto& it : items.items()) {
    if (std::any_of(it.genres.begin(), it.genres.end(), [&](const std::string& g) {
          return std::find(genres.begin(), genres.end(), g) != genres.end();
        })) {
      ids.push_back(it.id);
    }
  }
  return ids;
}
}  // namespace

GenreRestrictedRecommender::GenreRestrictedRecommender(const ItemTable& items,
                                                       std::vector<std::string> genres,
                                                       std::uint64_t seed)
    : inner_(with_genres(items, genres), seed) {}

std::vector<ItemId> GenreRestrictedRecommender::recommend(const UserId& user, int page, std::size_t n,
                                                          const std::set<ItemId>& exclude) const {
  return inner_.recommend(user, page, n, exclude);
}

std::unique_ptr<Recommender> make_recommender(const std::string& id, const ItemTable& items,
                                              std::span<const Interaction> train,
                                              std::uint64_t seed, const MfParams& mf) {
  if (id == "random") return std::make_unique<RandomRecommender>(items, seed);
  if (id == "pop") return std::make_unique<PopRecommender>(items, train);
  if (id == "mf") {
    return std::make_unique<MfRecommender>(items, std::make_shared<const MfModel>(train_mf(train, mf)));
  }
  throw ValidationError("unknown recommender '" + id + "' (expected random, pop or mf)");
}

}  // namespace simuser
