#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"

namespace simuser {

enum class MemoryKind { SeedRating, PageInteraction, Feeling, Reflection };

std::string_view memory_kind_label(MemoryKind k);
MemoryKind parse_memory_kind(std::string_view label);

struct MemoryEntry {
  std::string text;
  MemoryKind kind = MemoryKind::Feeling;
  llm::EmbeddingVector embedding;
  std::size_t sequence = 0;
};

struct ScoredEntry {
  MemoryEntry entry;
  double score = 0;
};

struct RetrievalResult {
  std::vector<ScoredEntry> entries;
  std::vector<std::string> queries_used;
};

// Liked above 4, disliked at 2 or below, neutral otherwise.
std::string seed_rating_text(std::string_view item_name, int score);

struct PageRecord {
  std::string item_type;
  int page_number = 1;
  std::vector<std::string> shown;
  std::vector<std::string> watched;
  std::vector<int> ratings;  // parallel to watched
  std::vector<std::string> disliked;
};
std::string page_interaction_text(const PageRecord& page);

class EpisodicMemory {
 public:
  // The gateway must outlive the memory.
  explicit EpisodicMemory(const llm::LlmGateway& gateway, std::string agent_id = {});

  // One seed entry per rating. Throws ValidationError unless empty.
  void seed_from_history(std::span<const Interaction> history, const ItemTable& items);

  // Throws ValidationError on empty text.
  std::size_t record(std::string text, MemoryKind kind);

  // Cosine top-k for one query; ties by sequence.
  std::vector<ScoredEntry> search(std::string_view query, std::size_t k) const;

  // Follow-up questions from the LLM widen the search; the union is ranked
  // by each entry's best similarity over all queries. A failed follow-up
  // call falls back to the single query.
  RetrievalResult self_ask_retrieve(const std::string& query, std::size_t k1,
                                    std::size_t followups = 2) const;

  const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // JSONL with text, kind and sequence; embeddings are recomputed on import.
  void export_jsonl(std::ostream& out) const;
  void import_jsonl(std::istream& in);

 private:
  std::vector<std::pair<std::size_t, double>> top_indices(const llm::EmbeddingVector& q,
                                                         std::size_t k) const;

  const llm::LlmGateway* gateway_;
  std::string agent_id_;
  std::vector<MemoryEntry> entries_;
  std::size_t next_sequence_ = 0;
};

}  // namespace simuser
