#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"

namespace simuser {

// Entities are named "<type>:<id>", e.g. "user:u01", "item:i07", "genre:Comedy".
enum class EntityType { User, Item, Genre, Person, Other };

EntityType entity_type(std::string_view name);
std::string user_entity(std::string_view id);
std::string item_entity(std::string_view id);
std::string genre_entity(std::string_view name);
// Part after the type prefix.
std::string_view entity_key(std::string_view name);

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const Triple&) const = default;
};

struct RelationSchema {
  std::set<std::string> relations{"liked", "disliked", "rated", "has_genre", "acts_in", "directed"};
  int liked_min = 4;
  int disliked_max = 2;

  std::string rating_relation(int rating) const;
};

using NodeId = std::uint32_t;

struct Adjacent {
  NodeId to;
  std::uint16_t relation;
  bool forward;  // edge points from this node to `to`
};

class KnowledgeGraph {
 public:
  // Throws ValidationError for duplicate entities, unknown entities in a
  // triple, or relations outside the schema. Duplicate triples collapse.
  KnowledgeGraph(std::vector<std::string> entities, std::vector<Triple> triples,
                 RelationSchema schema = {});

  // Nodes: every item and genre of the table, every user in `users` or in
  // `train`. Edges: has_genre for items, one rating edge per (user, item)
  // pair of `train` at its most recent rating.
  static std::shared_ptr<const KnowledgeGraph> build(std::span<const Interaction> train,
                                                     const ItemTable& items,
                                                     std::span<const UserId> users = {},
                                                     RelationSchema schema = {});

  std::size_t node_count() const noexcept { return names_.size(); }
  std::size_t edge_count() const noexcept { return triples_.size(); }
  std::optional<NodeId> find(std::string_view name) const;
  // Throws ValidationError for an unknown entity.
  NodeId id(std::string_view name) const;
  const std::string& name(NodeId n) const { return names_[n]; }
  EntityType type(NodeId n) const { return types_[n]; }
  // Human-readable label: item title, genre name, user id.
  const std::string& label(NodeId n) const { return labels_[n]; }
  const std::string& relation_name(std::uint16_t r) const { return relation_names_[r]; }
  std::optional<std::uint16_t> relation_id(std::string_view r) const;
  const RelationSchema& schema() const noexcept { return schema_; }

  // Sorted by (type of neighbor, neighbor id).
  std::span<const Adjacent> neighbors(NodeId n) const { return adjacency_[n]; }
  const std::vector<Triple>& triples() const noexcept { return triples_; }
  bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }

  // Train-split mean rating; absent for unrated items.
  std::optional<double> item_mean(const ItemId& id) const;
  // The user's most recent train rating of the item.
  std::optional<int> rating(const UserId& u, const ItemId& i) const;

  // head \t relation \t tail, one triple per line.
  void export_triples(std::ostream& out) const;

  // Memo of base-graph closed-walk counts, filled by GraphOverlay.
  std::optional<std::uint64_t> cached_closed(NodeId n, int max_length) const;
  void store_closed(NodeId n, int max_length, std::uint64_t count) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> labels_;
  std::vector<EntityType> types_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::string> relation_names_;
  RelationSchema schema_;
  std::vector<std::vector<Adjacent>> adjacency_;
  std::vector<Triple> triples_;
  std::set<Triple> triple_set_;
  std::unordered_map<ItemId, double> item_means_;
  std::map<std::pair<UserId, ItemId>, int> ratings_;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::uint64_t, std::uint64_t> closed_cache_;
};

// An agent's private view: the shared base plus the edges it grew. The base
// is never modified.
class GraphOverlay {
 public:
  explicit GraphOverlay(std::shared_ptr<const KnowledgeGraph> base);

  // True when the triple is new. Throws ValidationError for unknown entities
  // or relations.
  bool add(const Triple& t);
  // Adds the rating edge for an interaction.
  bool grow(const Interaction& interaction);

  const KnowledgeGraph& base() const noexcept { return *base_; }
  std::shared_ptr<const KnowledgeGraph> base_ptr() const noexcept { return base_; }
  const std::vector<Triple>& added() const noexcept { return added_; }
  bool contains(const Triple& t) const;
  // Latest rating grown into the overlay, else the base rating.
  std::optional<int> rating(const UserId& u, const ItemId& i) const;

  // Calls fn(Adjacent) for every edge at n; only neighbors of type `only`
  // when given.
  template <typename Fn>
  void for_each_neighbor(NodeId n, std::optional<EntityType> only, Fn&& fn) const;

  std::uint64_t closed_count(NodeId n, int max_length) const;

 private:
  void refresh_dirty() const;

  std::shared_ptr<const KnowledgeGraph> base_;
  std::vector<Triple> added_;
  std::set<Triple> added_set_;
  std::unordered_map<NodeId, std::vector<Adjacent>> extra_;
  std::map<std::pair<UserId, ItemId>, int> ratings_;
  // Nodes whose closed walks (up to the bound the set was built for) may
  // use overlay edges.
  mutable int dirty_bound_ = -1;
  mutable std::unordered_set<NodeId> dirty_;
};

// Path instances from x, keyed by end node. A path of length <= L visits
// distinct intermediate nodes that differ from both endpoints; parallel
// edges count separately. The entry for x itself counts closed walks.
// With `target_type` only ends of that type are counted.
std::unordered_map<NodeId, std::uint64_t> count_paths_from(const GraphOverlay& g, NodeId x,
                                                           int max_length,
                                                           std::optional<EntityType> target_type = {});

// Throws ValidationError on unknown entities or L < 1.
std::uint64_t path_count(const GraphOverlay& g, std::string_view x, std::string_view y,
                         int max_length = 3);

// 2|P_xy| / (|P_xx| + |P_yy|). Throws SimilarityUndefinedError when the
// denominator is zero.
double pathsim(const GraphOverlay& g, std::string_view x, std::string_view y, int max_length = 3);

struct MetaPath {
  std::vector<NodeId> nodes;
  std::vector<std::uint16_t> relations;
  std::vector<bool> forward;
  std::size_t length() const noexcept { return relations.size(); }
};

// "u01 →liked→ Alien →has_genre→ Horror ←has_genre← Scream"
std::string render_path(const KnowledgeGraph& g, const MetaPath& p);

// Valid paths x⇝y up to L, shortest first, then by rendered text. Lengths are
// explored in increasing order until `limit` paths are found; at most 256
// paths per length are considered, taken in adjacency order.
std::vector<MetaPath> enumerate_paths(const GraphOverlay& g, NodeId x, NodeId y, int max_length,
                                      std::size_t limit);

// Lazily embedded "title genre genre ..." texts, shared across agents.
class SemanticIndex {
 public:
  SemanticIndex(const llm::LlmGateway& gateway, const ItemTable& items);
  const llm::EmbeddingVector& item(const ItemId& id) const;
  double similarity(const ItemId& a, const ItemId& b) const;
  static std::string item_text(const Item& item);

 private:
  const llm::LlmGateway* gateway_;
  const ItemTable* items_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<ItemId, llm::EmbeddingVector> cache_;
};

struct BlendParams {
  double alpha = 0.8;
  double embed_weight = 0.25;
  int max_length = 3;
  std::size_t k2 = 3;
  std::size_t max_paths = 3;
};

struct SimilarityBreakdown {
  double item_item = 0;
  double user_item = 0;
  double blended = 0;
  double semantic = 0;
  double final_score = 0;
  std::vector<MetaPath> supporting_paths;
};

inline double blend(double item_item, double user_item, double alpha) {
  return alpha * item_item + (1.0 - alpha) * user_item;
}
inline double with_semantic(double blended, double semantic, double w) {
  return (1.0 - w) * blended + w * semantic;
}

// Pathsim terms propagate SimilarityUndefinedError. `semantic` may be null
// only when embed_weight is 0.
SimilarityBreakdown blended_score(const GraphOverlay& g, const UserId& u, const ItemId& x,
                                  const ItemId& y, const BlendParams& params,
                                  const SemanticIndex* semantic);

struct SimilarItem {
  ItemId item;
  std::string title;
  SimilarityBreakdown breakdown;
  std::optional<double> average_rating;
  std::optional<int> own_rating;
  std::vector<std::string> paths;  // rendered supporting paths
};

// Candidates are the items other than x within L hops of x, scored in full,
// sorted by final score desc then item id. An undefined user-item term counts
// as 0. Throws ValidationError when x is not an item of the graph.
std::vector<SimilarItem> retrieve_similar(const GraphOverlay& g, const UserId& u, const ItemId& x,
                                          const BlendParams& params, const SemanticIndex* semantic);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::map<std::string, std::size_t> nodes_by_type;
  std::map<std::string, std::size_t> edges_by_relation;
};
GraphStats graph_stats(const KnowledgeGraph& g);

template <typename Fn>
void GraphOverlay::for_each_neighbor(NodeId n, std::optional<EntityType> only, Fn&& fn) const {
  auto adj = base_->neighbors(n);
  if (only) {
    const auto lo = std::lower_bound(adj.begin(), adj.end(), *only, [&](const Adjacent& a, EntityType t) {
      return base_->type(a.to) < t;
    });
    for (auto it = lo; it != adj.end() && base_->type(it->to) == *only; ++it) fn(*it);
  } else {
    for (const auto& a : adj) fn(a);
  }
  if (auto it = extra_.find(n); it != extra_.end()) {
    for (const auto& a : it->second) {
      if (!only || base_->type(a.to) == *only) fn(a);
    }
  }
}

}  // namespace simuser
