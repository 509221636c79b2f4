#include "simuser/llm/embedding.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "simuser/error.hpp"
#include "simuser/rng.hpp"

namespace simuser::llm {

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("embedding dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::fmax(-1.0, std::fmin(1.0, c));
}

void HashEmbedder::add_feature(std::vector<double>& acc, std::string_view feature,
                               double weight) const {
  const std::uint64_t h = fnv1a(feature, seed_);
  const std::size_t bucket = static_cast<std::size_t>(h % dim_);
  const double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
  acc[bucket] += sign * weight;
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  std::vector<double> acc(dim_, 0.0);

  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  for (const auto& w : words) add_feature(acc, "w:" + w, 1.0);
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    add_feature(acc, "b:" + words[i] + " " + words[i + 1], 0.5);
  }
  const std::string padded = "\x02" + std::string(text) + "\x03";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    add_feature(acc, "c:" + padded.substr(i, 3), 0.25);
  }

  double n = 0.0;
  for (double v : acc) n += v * v;
  n = std::sqrt(n);
  if (n == 0.0) {
    acc[fnv1a(text, seed_) % dim_] = 1.0;
  } else {
    for (auto& v : acc) v /= n;
  }
  return EmbeddingVector{std::move(acc)};
}

}  // namespace simuser::llm
