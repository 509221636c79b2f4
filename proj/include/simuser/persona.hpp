#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"

namespace simuser {

enum class Pickiness { NotPicky, ModeratelyPicky, ExtremelyPicky };

// "not_picky", "moderately_picky", "extremely_picky"
std::string_view pickiness_label(Pickiness p);
// Prompt wording: "not picky", ...
std::string_view pickiness_phrase(Pickiness p);
Pickiness parse_pickiness(std::string_view label);

// R-bar >= 4.5 not picky, [3.5, 4.5) moderately, < 3.5 extremely.
// Throws ValidationError outside [1, 5].
Pickiness pickiness_level(double average_rating);

struct HabitTraits {
  long engagement = 0;    // number of rated items
  double conformity = 0;  // mean squared deviation from the item averages
  long variety = 0;       // distinct genres over rated items
};

// Duplicate ratings of one item count once, at their most recent value.
// Throws ValidationError when a rated item is unknown, has no genres, or has
// no entry in item_means.
HabitTraits derive_habits(std::span<const Interaction> history, const ItemTable& items,
                          const std::unordered_map<ItemId, double>& item_means);

inline constexpr std::array<std::string_view, 5> kBigFive = {
    "Openness", "Conscientiousness", "Extraversion", "Agreeableness", "Neuroticism"};

struct Persona {
  int age = 0;
  std::string occupation;
  std::array<int, 5> big_five{2, 2, 2, 2, 2};
  Pickiness pickiness = Pickiness::ModeratelyPicky;
  std::string taste_summary;
  HabitTraits habits;

  // Multi-line natural-language description used in prompts.
  std::string describe() const;
};

struct PersonaVocab {
  std::vector<int> ages;
  std::vector<std::string> occupations;
  std::vector<std::string> personalities;

  // MovieLens-1M age groups and occupation labels.
  static PersonaVocab movielens();
};

// Throws ValidationError when a facet is outside 1..3, the age is not in the
// vocab, or the occupation is not in the vocab (case-insensitive).
void validate_persona(const Persona& p, const PersonaVocab& vocab);

struct TasteSample {
  std::vector<std::string> liked;     // titles rated >= 4
  std::vector<std::string> disliked;  // titles rated < 3
};

// Seeded uniform sample, without replacement, of min(sample_size, |history|)
// interactions, split into liked and disliked titles.
TasteSample sample_tastes(std::span<const Interaction> history, const ItemTable& items,
                          std::size_t sample_size, std::uint64_t seed);

struct PersonaConfig {
  std::size_t summary_sample = 50;
  std::size_t candidates = 5;  // m
  std::size_t subsets = 3;     // j
  std::size_t subset_size = 10;
  std::uint64_t seed = 7;
  std::string item_type = "movie";
};

// Throws InsufficientDataError on empty history.
std::string summarize_tastes(const llm::LlmGateway& gateway, std::span<const Interaction> history,
                             const ItemTable& items, const PersonaConfig& config);

// One call; the reply lists m personas as repeated field groups. After a
// failed retry throws LlmFormatError; a candidate outside the vocab or
// facet range throws ValidationError.
std::vector<Persona> generate_candidates(const llm::LlmGateway& gateway,
                                         const std::string& taste_summary,
                                         std::span<const Interaction> history,
                                         const ItemTable& items, const PersonaVocab& vocab,
                                         const PersonaConfig& config);

struct ConsistencyScore {
  std::size_t persona_index = 0;
  double score = 0;
  // (own, other) rating per round.
  std::vector<std::pair<int, int>> per_subset;
};

// Every round draws iota from the user's history and iota-bar from the
// other users' pooled interactions. Subsets depend only on (seed, user), so
// all candidates of one user are judged on the same samples.
// Throws InsufficientDataError when either side has fewer than subset_size rows.
ConsistencyScore self_consistency_score(const llm::LlmGateway& gateway, const Persona& persona,
                                        std::size_t persona_index, const UserId& user,
                                        std::span<const Interaction> own_history,
                                        std::span<const Interaction> others_pool,
                                        const ItemTable& items, const PersonaConfig& config);

// Index of the highest score; the lowest index wins ties. Throws
// ValidationError on empty input.
std::size_t argmax_score(std::span<const double> scores);

struct PersonaMatch {
  UserId user;
  std::size_t chosen = 0;
  Persona persona;
  std::vector<Persona> candidates;
  std::vector<ConsistencyScore> scores;
};

PersonaMatch match_persona(const llm::LlmGateway& gateway, std::vector<Persona> candidates,
                           const UserId& user, std::span<const Interaction> own_history,
                           std::span<const Interaction> others_pool, const ItemTable& items,
                           const PersonaConfig& config);

// Full phase: summary, candidates, matching, then pickiness and habits from
// the user's rows in `train`.
PersonaMatch build_persona(const llm::LlmGateway& gateway, const UserId& user,
                           std::span<const Interaction> train, const ItemTable& items,
                           const PersonaVocab& vocab, const PersonaConfig& config);

nlohmann::json to_json(const Persona& p);
Persona persona_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PersonaMatch& m);

}  // namespace simuser
