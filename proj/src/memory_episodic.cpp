#include "simuser/memory_episodic.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"

namespace simuser {

namespace {

std::string join(const std::vector<std::string>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

bool ranks_before(const ScoredEntry& a, const ScoredEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.entry.sequence < b.entry.sequence;
}

}  // namespace

std::string_view memory_kind_label(MemoryKind k) {
  switch (k) {
    case MemoryKind::SeedRating: return "seed_rating";
    case MemoryKind::PageInteraction: return "page_interaction";
    case MemoryKind::Feeling: return "feeling";
    case MemoryKind::Reflection: return "reflection";
  }
  return "feeling";
}

MemoryKind parse_memory_kind(std::string_view label) {
  for (auto k : {MemoryKind::SeedRating, MemoryKind::PageInteraction, MemoryKind::Feeling,
                 MemoryKind::Reflection}) {
    if (label == memory_kind_label(k)) return k;
  }
  throw ValidationError("unknown memory kind '" + std::string(label) + "'");
}

std::string seed_rating_text(std::string_view item_name, int score) {
  const std::string name(item_name);
  const std::string s = std::to_string(score);
  if (score > 4) return "I liked " + name + " based on my review score of " + s;
  if (score <= 2) return "I disliked " + name + " based on my review score of " + s;
  return "I felt neutral about " + name + " based on my review score of " + s;
}

std::string page_interaction_text(const PageRecord& p) {
  std::vector<std::string> ratings;
  for (int r : p.ratings) ratings.push_back(std::to_string(r));
  return "The recommender system recommended the following " + p.item_type + " to me on page " +
         std::to_string(p.page_number) + ": " + join(p.shown) + ", among them, I selected " +
         join(p.watched) + " and rate them " + join(ratings) + " respectively. I dislike the rest " +
         p.item_type + " items: " + join(p.disliked);
}

EpisodicMemory::EpisodicMemory(const llm::LlmGateway& gateway, std::string agent_id)
    : gateway_(&gateway), agent_id_(std::move(agent_id)) {}

void EpisodicMemory::seed_from_history(std::span<const Interaction> history,
                                       const ItemTable& items) {
  if (!entries_.empty()) throw ValidationError("seed_from_history needs an empty memory");
  for (const auto& r : history) {
    const Item* item = items.find(r.item_id);
    record(seed_rating_text(item ? item->title : r.item_id, r.rating), MemoryKind::SeedRating);
  }
}

std::size_t EpisodicMemory::record(std::string text, MemoryKind kind) {
  if (text.empty()) throw ValidationError("memory entries need text");
  MemoryEntry e;
  e.embedding = gateway_->embed(text);
  e.text = std::move(text);
  e.kind = kind;
  e.sequence = next_sequence_++;
  entries_.push_back(std::move(e));
  return entries_.back().sequence;
}

std::vector<std::pair<std::size_t, double>> EpisodicMemory::top_indices(
    const llm::EmbeddingVector& q, std::size_t k) const {
  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    scored.emplace_back(i, llm::cosine(q, entries_[i].embedding));
  }
  const std::size_t n = std::min(k, scored.size());
  // index order equals sequence order
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.second != b.second ? a.second > b.second : a.first < b.first;
                    });
  scored.resize(n);
  return scored;
}

std::vector<ScoredEntry> EpisodicMemory::search(std::string_view query, std::size_t k) const {
  std::vector<ScoredEntry> out;
  if (entries_.empty() || k == 0) return out;
  for (auto [i, score] : top_indices(gateway_->embed(query), k)) out.push_back({entries_[i], score});
  return out;
}

RetrievalResult EpisodicMemory::self_ask_retrieve(const std::string& query, std::size_t k1,
                                                  std::size_t followups) const {
  RetrievalResult result;
  result.queries_used.push_back(query);
  if (entries_.empty() || k1 == 0) return result;

  if (followups > 0) {
    try {
      const llm::Bindings b{{"query", query},
                            {"n_questions", std::to_string(followups)},
                            {"agent_id", agent_id_}};
      auto questions = gateway_->complete(llm::tags::kSelfAsk, b).parsed->all("QUESTION");
      if (questions.size() > followups) questions.resize(followups);
      for (auto& q : questions) {
        if (!q.empty()) result.queries_used.push_back(std::move(q));
      }
    } catch (const LlmError& e) {
      spdlog::warn("self-ask follow-ups failed, using the single query: {}", e.what());
    }
  }

  std::vector<llm::EmbeddingVector> qv;
  for (const auto& q : result.queries_used) qv.push_back(gateway_->embed(q));

  // candidates are the union of every query's top-k1, scored by their best query
  std::map<std::size_t, double> best;
  for (const auto& v : qv) {
    for (auto [i, score] : top_indices(v, k1)) best.emplace(i, score);
  }
  for (auto& [i, score] : best) {
    for (const auto& v : qv) score = std::max(score, llm::cosine(v, entries_[i].embedding));
  }
  for (const auto& [i, score] : best) result.entries.push_back({entries_[i], score});
  std::sort(result.entries.begin(), result.entries.end(), ranks_before);
  if (result.entries.size() > k1) result.entries.resize(k1);
  return result;
}

void EpisodicMemory::export_jsonl(std::ostream& out) const {
  for (const auto& e : entries_) {
    const nlohmann::json j{{"text", e.text},
                           {"kind", std::string(memory_kind_label(e.kind))},
                           {"sequence", e.sequence}};
    out << j.dump() << '\n';
  }
}

void EpisodicMemory::import_jsonl(std::istream& in) {
  std::vector<MemoryEntry> loaded;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("memory snapshot: ") + e.what(), line_no);
    }
    MemoryEntry e;
    e.text = j.at("text").get<std::string>();
    e.kind = parse_memory_kind(j.at("kind").get<std::string>());
    e.sequence = j.at("sequence").get<std::size_t>();
    if (!loaded.empty() && e.sequence <= loaded.back().sequence) {
      throw ParseError("memory snapshot sequence is not increasing", line_no);
    }
    e.embedding = gateway_->embed(e.text);
    loaded.push_back(std::move(e));
  }
  entries_ = std::move(loaded);
  next_sequence_ = entries_.empty() ? 0 : entries_.back().sequence + 1;
}

}  // namespace simuser
