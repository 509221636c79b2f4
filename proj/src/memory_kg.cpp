#include "simuser/memory_kg.hpp"

#include <algorithm>
#include <deque>
#include <ostream>

#include "simuser/error.hpp"

namespace simuser {

namespace {

constexpr std::size_t kPathsPerLength = 256;

std::uint64_t cache_key(NodeId n, int max_length) {
  return (static_cast<std::uint64_t>(n) << 8) | static_cast<std::uint64_t>(max_length & 0xff);
}

void check_length(int max_length) {
  if (max_length < 1 || max_length > 8) {
    throw ValidationError("path length bound must be in 1..8, got " + std::to_string(max_length));
  }
}

}  // namespace

EntityType entity_type(std::string_view name) {
  const auto colon = name.find(':');
  const auto prefix = name.substr(0, colon == std::string_view::npos ? 0 : colon);
  if (prefix == "user") return EntityType::User;
  if (prefix == "item") return EntityType::Item;
  if (prefix == "genre") return EntityType::Genre;
  if (prefix == "person") return EntityType::Person;
  return EntityType::Other;
}

std::string user_entity(std::string_view id) { return "user:" + std::string(id); }
std::string item_entity(std::string_view id) { return "item:" + std::string(id); }
std::string genre_entity(std::string_view name) { return "genre:" + std::string(name); }

std::string_view entity_key(std::string_view name) {
  const auto colon = name.find(':');
  return colon == std::string_view::npos ? name : name.substr(colon + 1);
}

std::string RelationSchema::rating_relation(int rating) const {
  if (rating >= liked_min) return "liked";
  if (rating <= disliked_max) return "disliked";
  return "rated";
}

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entities, std::vector<Triple> triples,
                               RelationSchema schema)
    : schema_(std::move(schema)) {
  names_ = std::move(entities);
  for (NodeId i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) {
      throw ValidationError("duplicate entity " + names_[i]);
    }
    types_.push_back(entity_type(names_[i]));
    labels_.emplace_back(entity_key(names_[i]));
  }
  relation_names_.assign(schema_.relations.begin(), schema_.relations.end());
  adjacency_.resize(names_.size());

  for (auto& t : triples) {
    const auto h = find(t.head);
    const auto tl = find(t.tail);
    if (!h || !tl) {
      throw ValidationError("triple (" + t.head + ", " + t.relation + ", " + t.tail +
                            ") references an unknown entity");
    }
    const auto r = relation_id(t.relation);
    if (!r) throw ValidationError("relation '" + t.relation + "' is not in the schema");
    if (!triple_set_.insert(t).second) continue;
    adjacency_[*h].push_back({*tl, *r, true});
    if (*h != *tl) adjacency_[*tl].push_back({*h, *r, false});
    triples_.push_back(std::move(t));
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [&](const Adjacent& a, const Adjacent& b) {
      if (types_[a.to] != types_[b.to]) return types_[a.to] < types_[b.to];
      if (a.to != b.to) return a.to < b.to;
      if (a.relation != b.relation) return a.relation < b.relation;
      return a.forward > b.forward;
    });
  }
}

std::shared_ptr<const KnowledgeGraph> KnowledgeGraph::build(std::span<const Interaction> train,
                                                            const ItemTable& items,
                                                            std::span<const UserId> users,
                                                            RelationSchema schema) {
  std::vector<std::string> entities;
  std::set<std::string> genres;
  for (const auto& it : items.items()) {
    entities.push_back(item_entity(it.id));
    genres.insert(it.genres.begin(), it.genres.end());
  }
  for (const auto& g : genres) entities.push_back(genre_entity(g));
  std::set<UserId> user_set(users.begin(), users.end());
  for (const auto& r : train) user_set.insert(r.user_id);
  for (const auto& u : user_set) entities.push_back(user_entity(u));

  std::vector<Triple> triples;
  for (const auto& it : items.items()) {
    for (const auto& g : it.genres) triples.push_back({item_entity(it.id), "has_genre", genre_entity(g)});
  }
  const auto latest = latest_per_pair(train);
  for (const auto& r : latest) {
    if (!items.contains(r.item_id)) {
      throw ValidationError("training interaction references unknown item " + r.item_id);
    }
    triples.push_back({user_entity(r.user_id), schema.rating_relation(r.rating), item_entity(r.item_id)});
  }

  auto g = std::make_shared<KnowledgeGraph>(std::move(entities), std::move(triples), std::move(schema));
  for (const auto& it : items.items()) g->labels_[g->id(item_entity(it.id))] = it.title;
  g->item_means_ = aggregated_ratings(train);
  for (const auto& r : latest) g->ratings_[{r.user_id, r.item_id}] = r.rating;
  return g;
}

std::optional<NodeId> KnowledgeGraph::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId KnowledgeGraph::id(std::string_view name) const {
  if (auto n = find(name)) return *n;
  throw ValidationError("unknown entity " + std::string(name));
}

std::optional<std::uint16_t> KnowledgeGraph::relation_id(std::string_view r) const {
  for (std::size_t i = 0; i < relation_names_.size(); ++i) {
    if (relation_names_[i] == r) return static_cast<std::uint16_t>(i);
  }
  return std::nullopt;
}

std::optional<double> KnowledgeGraph::item_mean(const ItemId& id) const {
  auto it = item_means_.find(id);
  if (it == item_means_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> KnowledgeGraph::rating(const UserId& u, const ItemId& i) const {
  auto it = ratings_.find({u, i});
  if (it == ratings_.end()) return std::nullopt;
  return it->second;
}

void KnowledgeGraph::export_triples(std::ostream& out) const {
  for (const auto& t : triples_) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

std::optional<std::uint64_t> KnowledgeGraph::cached_closed(NodeId n, int max_length) const {
  std::lock_guard lock(cache_mutex_);
  auto it = closed_cache_.find(cache_key(n, max_length));
  if (it == closed_cache_.end()) return std::nullopt;
  return it->second;
}

void KnowledgeGraph::store_closed(NodeId n, int max_length, std::uint64_t count) const {
  std::lock_guard lock(cache_mutex_);
  closed_cache_.emplace(cache_key(n, max_length), count);
}

GraphOverlay::GraphOverlay(std::shared_ptr<const KnowledgeGraph> base) : base_(std::move(base)) {
  if (!base_) throw ValidationError("overlay needs a base graph");
}

bool GraphOverlay::contains(const Triple& t) const {
  return base_->contains(t) || added_set_.count(t) != 0;
}

bool GraphOverlay::add(const Triple& t) {
  const NodeId h = base_->id(t.head);
  const NodeId tl = base_->id(t.tail);
  const auto r = base_->relation_id(t.relation);
  if (!r) throw ValidationError("relation '" + t.relation + "' is not in the schema");
  if (contains(t)) return false;
  added_set_.insert(t);
  added_.push_back(t);
  extra_[h].push_back({tl, *r, true});
  if (h != tl) extra_[tl].push_back({h, *r, false});
  dirty_bound_ = -1;
  return true;
}

std::optional<int> GraphOverlay::rating(const UserId& u, const ItemId& i) const {
  if (auto it = ratings_.find({u, i}); it != ratings_.end()) return it->second;
  return base_->rating(u, i);
}

bool GraphOverlay::grow(const Interaction& i) {
  const bool added =
      add({user_entity(i.user_id), base_->schema().rating_relation(i.rating), item_entity(i.item_id)});
  ratings_[{i.user_id, i.item_id}] = i.rating;
  return added;
}

// Every node of a closed walk of length <= L lies within floor(L/2) hops of
// its start, so only starts near both ends of an overlay edge can differ
// from the base count.
void GraphOverlay::refresh_dirty() const {
  dirty_.clear();
  const int radius = dirty_bound_ / 2;
  auto ball = [&](NodeId start) {
    std::unordered_map<NodeId, int> dist{{start, 0}};
    std::deque<NodeId> queue{start};
    while (!queue.empty()) {
      const NodeId c = queue.front();
      queue.pop_front();
      if (dist[c] == radius) continue;
      for_each_neighbor(c, std::nullopt, [&](const Adjacent& a) {
        if (dist.emplace(a.to, dist[c] + 1).second) queue.push_back(a.to);
      });
    }
    return dist;
  };
  for (const auto& t : added_) {
    const auto a = ball(base_->id(t.head));
    const auto b = ball(base_->id(t.tail));
    for (const auto& [n, d] : a) {
      if (b.count(n)) dirty_.insert(n);
    }
  }
}

std::uint64_t GraphOverlay::closed_count(NodeId n, int max_length) const {
  if (dirty_bound_ != max_length) {
    dirty_bound_ = max_length;
    refresh_dirty();
  }
  const bool clean = dirty_.count(n) == 0;
  if (clean) {
    if (auto c = base_->cached_closed(n, max_length)) return *c;
  }
  auto counts = count_paths_from(*this, n, max_length, base_->type(n));
  const std::uint64_t c = counts.count(n) ? counts.at(n) : 0;
  if (clean) base_->store_closed(n, max_length, c);
  return c;
}

std::unordered_map<NodeId, std::uint64_t> count_paths_from(const GraphOverlay& g, NodeId x,
                                                           int max_length,
                                                           std::optional<EntityType> target_type) {
  check_length(max_length);
  std::unordered_map<NodeId, std::uint64_t> counts;
  std::vector<NodeId> inner;  // intermediates on the current path
  auto is_inner = [&](NodeId n) { return std::find(inner.begin(), inner.end(), n) != inner.end(); };
  const KnowledgeGraph& base = g.base();

  auto dfs = [&](auto&& self, NodeId c, int depth) -> void {
    const bool last = depth + 1 == max_length;
    g.for_each_neighbor(c, last ? target_type : std::nullopt, [&](const Adjacent& a) {
      const NodeId n = a.to;
      if (n != x && is_inner(n)) return;
      if (!target_type || base.type(n) == *target_type) ++counts[n];
      if (!last && n != x) {
        // the endpoint of one path may be an intermediate of a longer one
        inner.push_back(n);
        self(self, n, depth + 1);
        inner.pop_back();
      }
    });
  };
  dfs(dfs, x, 0);
  return counts;
}

std::uint64_t path_count(const GraphOverlay& g, std::string_view x, std::string_view y,
                         int max_length) {
  check_length(max_length);
  const NodeId a = g.base().id(x);
  const NodeId b = g.base().id(y);
  if (a == b) return g.closed_count(a, max_length);
  const auto counts = count_paths_from(g, a, max_length, g.base().type(b));
  auto it = counts.find(b);
  return it == counts.end() ? 0 : it->second;
}

double pathsim(const GraphOverlay& g, std::string_view x, std::string_view y, int max_length) {
  const std::uint64_t xy = path_count(g, x, y, max_length);
  const std::uint64_t xx = g.closed_count(g.base().id(x), max_length);
  const std::uint64_t yy = g.closed_count(g.base().id(y), max_length);
  if (xx + yy == 0) {
    throw SimilarityUndefinedError("pathsim(" + std::string(x) + ", " + std::string(y) +
                                   ") has no closed walks at either end");
  }
  return 2.0 * static_cast<double>(xy) / static_cast<double>(xx + yy);
}

std::string render_path(const KnowledgeGraph& g, const MetaPath& p) {
  std::string s;
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    if (i) {
      const auto& r = g.relation_name(p.relations[i - 1]);
      s += p.forward[i - 1] ? " →" + r + "→ " : " ←" + r + "← ";
    }
    s += g.label(p.nodes[i]);
  }
  return s;
}

std::vector<MetaPath> enumerate_paths(const GraphOverlay& g, NodeId x, NodeId y, int max_length,
                                      std::size_t limit) {
  check_length(max_length);
  const KnowledgeGraph& base = g.base();
  std::vector<MetaPath> out;
  for (int len = 1; len <= max_length && out.size() < limit; ++len) {
    std::vector<MetaPath> found;
    MetaPath cur;
    cur.nodes.push_back(x);
    auto dfs = [&](auto&& self, NodeId c, int depth) -> void {
      if (found.size() >= kPathsPerLength) return;
      const bool last = depth + 1 == len;
      g.for_each_neighbor(c, last ? std::optional(base.type(y)) : std::nullopt, [&](const Adjacent& a) {
        if (found.size() >= kPathsPerLength) return;
        const NodeId n = a.to;
        if (last) {
          if (n != y) return;
        } else if (n == x || n == y ||
                   std::find(cur.nodes.begin() + 1, cur.nodes.end(), n) != cur.nodes.end()) {
          return;
        }
        cur.nodes.push_back(n);
        cur.relations.push_back(a.relation);
        cur.forward.push_back(a.forward);
        if (last) {
          found.push_back(cur);
        } else {
          self(self, n, depth + 1);
        }
        cur.nodes.pop_back();
        cur.relations.pop_back();
        cur.forward.pop_back();
      });
    };
    dfs(dfs, x, 0);
    std::vector<std::pair<std::string, std::size_t>> keyed;
    for (std::size_t i = 0; i < found.size(); ++i) keyed.emplace_back(render_path(base, found[i]), i);
    std::sort(keyed.begin(), keyed.end());
    for (const auto& [text, i] : keyed) {
      if (out.size() >= limit) break;
      out.push_back(found[i]);
    }
  }
  return out;
}

SemanticIndex::SemanticIndex(const llm::LlmGateway& gateway, const ItemTable& items)
    : gateway_(&gateway), items_(&items) {}

std::string SemanticIndex::item_text(const Item& item) {
  std::string s = item.title;
  for (const auto& g : item.genres) s += " " + g;
  return s;
}

const llm::EmbeddingVector& SemanticIndex::item(const ItemId& id) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  }
  auto v = gateway_->embed(item_text(items_->at(id)));
  std::lock_guard lock(mutex_);
  return cache_.emplace(id, std::move(v)).first->second;
}

double SemanticIndex::similarity(const ItemId& a, const ItemId& b) const {
  return llm::cosine(item(a), item(b));
}

SimilarityBreakdown blended_score(const GraphOverlay& g, const UserId& u, const ItemId& x,
                                  const ItemId& y, const BlendParams& params,
                                  const SemanticIndex* semantic) {
  SimilarityBreakdown b;
  b.item_item = pathsim(g, item_entity(x), item_entity(y), params.max_length);
  b.user_item = pathsim(g, user_entity(u), item_entity(y), params.max_length);
  b.blended = blend(b.item_item, b.user_item, params.alpha);
  if (params.embed_weight != 0.0) {
    if (!semantic) throw ValidationError("semantic blending needs a SemanticIndex");
    b.semantic = semantic->similarity(x, y);
  }
  b.final_score = with_semantic(b.blended, b.semantic, params.embed_weight);
  return b;
}

std::vector<SimilarItem> retrieve_similar(const GraphOverlay& g, const UserId& u, const ItemId& x,
                                          const BlendParams& params, const SemanticIndex* semantic) {
  const KnowledgeGraph& base = g.base();
  const auto xn = base.find(item_entity(x));
  if (!xn || base.type(*xn) != EntityType::Item) {
    throw ValidationError("query item " + x + " is not in the graph");
  }
  const auto un = base.find(user_entity(u));
  const int L = params.max_length;

  const auto from_x = count_paths_from(g, *xn, L, EntityType::Item);
  std::unordered_map<NodeId, std::uint64_t> from_u;
  std::uint64_t uu = 0;
  if (un) {
    from_u = count_paths_from(g, *un, L, EntityType::Item);
    uu = g.closed_count(*un, L);
  }
  const std::uint64_t xx = g.closed_count(*xn, L);

  std::vector<SimilarItem> results;
  for (const auto& [yn, xy] : from_x) {
    if (yn == *xn) continue;
    const std::uint64_t yy = g.closed_count(yn, L);
    if (xx + yy == 0) continue;
    SimilarItem s;
    s.item = std::string(entity_key(base.name(yn)));
    s.title = base.label(yn);
    auto& b = s.breakdown;
    b.item_item = 2.0 * static_cast<double>(xy) / static_cast<double>(xx + yy);
    if (uu + yy > 0) {
      auto it = from_u.find(yn);
      b.user_item = 2.0 * static_cast<double>(it == from_u.end() ? 0 : it->second) /
                    static_cast<double>(uu + yy);
    }
    b.blended = blend(b.item_item, b.user_item, params.alpha);
    if (params.embed_weight != 0.0) {
      if (!semantic) throw ValidationError("semantic blending needs a SemanticIndex");
      b.semantic = semantic->similarity(x, s.item);
    }
    b.final_score = with_semantic(b.blended, b.semantic, params.embed_weight);
    results.push_back(std::move(s));
  }
  std::sort(results.begin(), results.end(), [](const SimilarItem& a, const SimilarItem& b) {
    if (a.breakdown.final_score != b.breakdown.final_score) {
      return a.breakdown.final_score > b.breakdown.final_score;
    }
    return a.item < b.item;
  });
  if (results.size() > params.k2) results.resize(params.k2);

  for (auto& s : results) {
    const NodeId yn = base.id(item_entity(s.item));
    s.average_rating = base.item_mean(s.item);
    s.own_rating = g.rating(u, s.item);
    if (un) {
      auto paths = enumerate_paths(g, *un, yn, L, params.max_paths);
      s.breakdown.supporting_paths = std::move(paths);
    }
    if (s.breakdown.supporting_paths.size() < params.max_paths) {
      for (auto& p : enumerate_paths(g, *xn, yn, L, params.max_paths - s.breakdown.supporting_paths.size())) {
        s.breakdown.supporting_paths.push_back(std::move(p));
      }
    }
    for (const auto& p : s.breakdown.supporting_paths) s.paths.push_back(render_path(base, p));
  }
  return results;
}

GraphStats graph_stats(const KnowledgeGraph& g) {
  GraphStats s;
  s.nodes = g.node_count();
  s.edges = g.edge_count();
  static constexpr const char* kTypeNames[] = {"user", "item", "genre", "person", "other"};
  for (NodeId n = 0; n < g.node_count(); ++n) ++s.nodes_by_type[kTypeNames[static_cast<int>(g.type(n))]];
  for (const auto& t : g.triples()) ++s.edges_by_relation[t.relation];
  return s;
}

}  // namespace simuser
