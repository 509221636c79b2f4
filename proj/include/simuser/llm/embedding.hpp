#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace simuser::llm {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const;
  bool operator==(const EmbeddingVector&) const = default;
};

// Cosine similarity; 0 when either vector has zero norm. Throws
// ValidationError on a dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Deterministic offline embedding: signed feature hashing of word unigrams,
// word bigrams and raw character trigrams into `dim` buckets, L2-normalized.
// Whitespace changes the trigram set, so "a" and "a " embed differently.
class HashEmbedder {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x5eed5eedULL)
      : dim_(dim), seed_(seed) {}

  EmbeddingVector embed(std::string_view text) const;
  std::size_t dim() const noexcept { return dim_; }

 private:
  void add_feature(std::vector<double>& acc, std::string_view feature, double weight) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace simuser::llm
