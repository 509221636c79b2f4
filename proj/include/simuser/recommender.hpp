#pragma once

#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simuser/dataset.hpp"

namespace simuser {

class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual std::string id() const = 0;
  // Up to n distinct items outside `exclude`; short when the catalog runs out.
  virtual std::vector<ItemId> recommend(const UserId& user, int page, std::size_t n,
                                        const std::set<ItemId>& exclude) const = 0;
};

// Seeded uniform order per (seed, user, page).
class RandomRecommender final : public Recommender {
 public:
  RandomRecommender(const ItemTable& items, std::uint64_t seed);
  RandomRecommender(std::vector<ItemId> catalog, std::uint64_t seed);
  std::string id() const override { return "random"; }
  std::vector<ItemId> recommend(const UserId& user, int page, std::size_t n,
                                const std::set<ItemId>& exclude) const override;

 private:
  std::vector<ItemId> catalog_;
  std::uint64_t seed_;
};

// Descending interaction count in the training rows, ties by item id;
// unrated catalog items follow in id order.
class PopRecommender final : public Recommender {
 public:
  PopRecommender(const ItemTable& items, std::span<const Interaction> train);
  std::string id() const override { return "pop"; }
  std::vector<ItemId> recommend(const UserId& user, int page, std::size_t n,
                                const std::set<ItemId>& exclude) const override;
  const std::vector<ItemId>& ranking() const noexcept { return ranking_; }

 private:
  std::vector<ItemId> ranking_;
};

struct MfParams {
  std::size_t rank = 16;
  double learning_rate = 0.01;
  double regularization = 0.05;
  std::size_t epochs = 30;
  std::uint64_t seed = 7;
  double init_scale = 0.1;
};

// r̂_ui = p_u · q_i.
class MfModel {
 public:
  std::size_t rank() const noexcept { return rank_; }
  bool has_user(const UserId& u) const { return users_.count(u) != 0; }
  bool has_item(const ItemId& i) const { return items_.count(i) != 0; }
  // Global train mean for unknown users or items.
  double predict(const UserId& u, const ItemId& i) const;
  std::span<const double> user_factors(const UserId& u) const;
  std::span<const double> item_factors(const ItemId& i) const;
  // Regularized squared-error objective per epoch, [0] at initialization.
  const std::vector<double>& loss_history() const noexcept { return loss_; }
  double rmse(std::span<const Interaction> rows) const;

 private:
  friend MfModel train_mf(std::span<const Interaction>, const MfParams&);
  std::size_t rank_ = 0;
  double mean_ = 0;
  std::unordered_map<UserId, std::size_t> users_;
  std::unordered_map<ItemId, std::size_t> items_;
  std::vector<double> p_;
  std::vector<double> q_;
  std::vector<double> loss_;
};

// SGD over the most recent rating of each pair, visited in a seeded order
// each epoch. Factors start at sqrt(mean / rank) plus uniform noise in
// ±init_scale. Throws ValidationError on empty input and TrainingDivergedError
// when the objective turns non-finite or exceeds 10x its initial value.
MfModel train_mf(std::span<const Interaction> train, const MfParams& params = {});

class MfRecommender final : public Recommender {
 public:
  MfRecommender(const ItemTable& items, std::shared_ptr<const MfModel> model);
  std::string id() const override { return "mf"; }
  std::vector<ItemId> recommend(const UserId& user, int page, std::size_t n,
                                const std::set<ItemId>& exclude) const override;
  const MfModel& model() const noexcept { return *model_; }

 private:
  std::vector<ItemId> catalog_;
  std::shared_ptr<const MfModel> model_;
};

// Random order over the items carrying at least one of `genres`.
class GenreRestrictedRecommender final : public Recommender {
 public:
  GenreRestrictedRecommender(const ItemTable& items, std::vector<std::string> genres,
                             std::uint64_t seed);
  std::string id() const override { return "genre_restricted"; }
  std::vector<ItemId> recommend(const UserId& user, int page, std::size_t n,
                                const std::set<ItemId>& exclude) const override;

 private:
  RandomRecommender inner_;
};

// "random", "pop" or "mf". Throws ValidationError for other ids.
std::unique_ptr<Recommender> make_recommender(const std::string& id, const ItemTable& items,
                                              std::span<const Interaction> train,
                                              std::uint64_t seed, const MfParams& mf = {});

}  // namespace simuser
