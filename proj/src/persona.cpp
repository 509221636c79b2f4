#include "simuser/persona.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"
#include "simuser/rng.hpp"

namespace simuser {

namespace {

constexpr std::array<const char*, 5> kFacetTags = {"OPENNESS", "CONSCIENTIOUSNESS", "EXTRAVERSION",
                                                   "AGREEABLENESS", "NEUROTICISM"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string_view facet_level(int v) {
  switch (v) {
    case 1: return "low";
    case 2: return "medium";
    case 3: return "high";
    default: return "unknown";
  }
}

const std::string& title_of(const ItemTable& items, const ItemId& id) {
  const Item* it = items.find(id);
  return it ? it->title : id;
}

std::string interaction_lines(std::span<const Interaction> rows, const ItemTable& items) {
  std::string out;
  for (const auto& r : rows) {
    out += "- " + title_of(items, r.item_id) + ": " + std::to_string(r.rating) + "/5\n";
  }
  return out;
}

std::vector<Interaction> pick(std::span<const Interaction> rows, Rng& rng, std::size_t k) {
  std::vector<Interaction> out;
  for (std::size_t idx : rng.sample_indices(rows.size(), k)) out.push_back(rows[idx]);
  return out;
}

}  // namespace

std::string_view pickiness_label(Pickiness p) {
  switch (p) {
    case Pickiness::NotPicky: return "not_picky";
    case Pickiness::ModeratelyPicky: return "moderately_picky";
    case Pickiness::ExtremelyPicky: return "extremely_picky";
  }
  return "moderately_picky";
}

std::string_view pickiness_phrase(Pickiness p) {
  switch (p) {
    case Pickiness::NotPicky: return "not picky";
    case Pickiness::ModeratelyPicky: return "moderately picky";
    case Pickiness::ExtremelyPicky: return "extremely picky";
  }
  return "moderately picky";
}

Pickiness parse_pickiness(std::string_view label) {
  for (auto p : {Pickiness::NotPicky, Pickiness::ModeratelyPicky, Pickiness::ExtremelyPicky}) {
    if (label == pickiness_label(p) || label == pickiness_phrase(p)) return p;
  }
  throw ValidationError("unknown pickiness label '" + std::string(label) + "'");
}

Pickiness pickiness_level(double r) {
  if (!std::isfinite(r) || r < 1.0 || r > 5.0) {
    throw ValidationError("average rating " + std::to_string(r) + " outside [1, 5]");
  }
  if (r >= 4.5) return Pickiness::NotPicky;
  if (r >= 3.5) return Pickiness::ModeratelyPicky;
  return Pickiness::ExtremelyPicky;
}

HabitTraits derive_habits(std::span<const Interaction> history, const ItemTable& items,
                          const std::unordered_map<ItemId, double>& item_means) {
  const auto rated = latest_per_pair(history);
  HabitTraits h;
  h.engagement = static_cast<long>(rated.size());
  std::set<std::string> genres;
  double sq = 0;
  for (const auto& r : rated) {
    const Item* item = items.find(r.item_id);
    if (!item) throw ValidationError("rated item " + r.item_id + " is not in the item table");
    if (item->genres.empty()) throw ValidationError("item " + r.item_id + " has no genre");
    genres.insert(item->genres.begin(), item->genres.end());
    auto it = item_means.find(r.item_id);
    if (it == item_means.end()) throw ValidationError("no aggregated rating for " + r.item_id);
    const double d = r.rating - it->second;
    sq += d * d;
  }
  h.conformity = rated.empty() ? 0.0 : sq / static_cast<double>(rated.size());
  h.variety = static_cast<long>(genres.size());
  return h;
}

std::string Persona::describe() const {
  std::string s = "Age: " + std::to_string(age) + "\nOccupation: " + occupation + "\nPersonality:";
  for (std::size_t i = 0; i < big_five.size(); ++i) {
    s += (i ? ", " : " ") + std::string(kBigFive[i]) + " " + std::string(facet_level(big_five[i]));
  }
  if (!taste_summary.empty()) s += "\nTastes: " + taste_summary;
  return s;
}

PersonaVocab PersonaVocab::movielens() {
  PersonaVocab v;
  v.ages = {1, 18, 25, 35, 45, 50, 56};
  v.occupations = {"other",         "academic/educator", "artist",
                   "clerical/admin", "college/grad student", "customer service",
                   "doctor/health care", "executive/managerial", "farmer",
                   "homemaker",     "K-12 student",      "lawyer",
                   "programmer",    "retired",           "sales/marketing",
                   "scientist",     "self-employed",     "technician/engineer",
                   "tradesman/craftsman", "unemployed",   "writer"};
  v.personalities.assign(kBigFive.begin(), kBigFive.end());
  return v;
}

void validate_persona(const Persona& p, const PersonaVocab& vocab) {
  for (std::size_t i = 0; i < p.big_five.size(); ++i) {
    if (p.big_five[i] < 1 || p.big_five[i] > 3) {
      throw ValidationError(std::string(kBigFive[i]) + " facet " + std::to_string(p.big_five[i]) +
                            " outside 1..3");
    }
  }
  if (!vocab.ages.empty() &&
      std::find(vocab.ages.begin(), vocab.ages.end(), p.age) == vocab.ages.end()) {
    throw ValidationError("age " + std::to_string(p.age) + " not in the vocabulary");
  }
  const auto occ = lower(p.occupation);
  const bool known = std::any_of(vocab.occupations.begin(), vocab.occupations.end(),
                                 [&](const std::string& o) { return lower(o) == occ; });
  if (!known) throw ValidationError("occupation '" + p.occupation + "' not in the vocabulary");
}

TasteSample sample_tastes(std::span<const Interaction> history, const ItemTable& items,
                          std::size_t sample_size, std::uint64_t seed) {
  Rng rng(seed);
  TasteSample t;
  for (const auto& r : pick(history, rng, std::min(sample_size, history.size()))) {
    if (r.rating >= 4) {
      t.liked.push_back(title_of(items, r.item_id));
    } else if (r.rating < 3) {
      t.disliked.push_back(title_of(items, r.item_id));
    }
  }
  return t;
}

std::string summarize_tastes(const llm::LlmGateway& gateway, std::span<const Interaction> history,
                             const ItemTable& items, const PersonaConfig& config) {
  if (history.empty()) throw InsufficientDataError("cannot summarize an empty history");
  const auto t = sample_tastes(history, items, config.summary_sample,
                               derive_seed(config.seed, "summary:" + history.front().user_id));
  const llm::Bindings b{{"item_type", config.item_type},
                        {"liked_items", t.liked.empty() ? "none" : join(t.liked, "; ")},
                        {"disliked_items", t.disliked.empty() ? "none" : join(t.disliked, "; ")},
                        {"agent_id", history.front().user_id}};
  const auto resp = gateway.complete(llm::tags::kPersonaSummary, b);
  return resp.parsed->text("SUMMARY");
}

std::vector<Persona> generate_candidates(const llm::LlmGateway& gateway,
                                         const std::string& taste_summary,
                                         std::span<const Interaction> history,
                                         const ItemTable& items, const PersonaVocab& vocab,
                                         const PersonaConfig& config) {
  if (vocab.ages.empty() || vocab.occupations.empty() || vocab.personalities.empty()) {
    throw ValidationError("persona vocabulary lists must be non-empty");
  }
  const std::size_t m = config.candidates;
  std::vector<std::string> ages;
  for (int a : vocab.ages) ages.push_back(std::to_string(a));

  const auto recent = history.size() > config.summary_sample
                          ? history.subspan(history.size() - config.summary_sample)
                          : history;
  const llm::Bindings b{{"item_type", config.item_type},
                        {"taste_summary", taste_summary},
                        {"history", interaction_lines(recent, items)},
                        {"m", std::to_string(m)},
                        {"ages", join(ages, ", ")},
                        {"occupations", join(vocab.occupations, ", ")},
                        {"personalities", join(vocab.personalities, ", ")},
                        {"agent_id", history.empty() ? "" : history.front().user_id}};

  llm::CompleteOptions opts;
  opts.validator = [m](const llm::ParsedOutput& out) -> std::optional<std::string> {
    for (const char* f : {"AGE", "OCCUPATION"}) {
      if (out.count(f) < m) return "expected " + std::to_string(m) + " " + f + " lines";
    }
    for (const char* f : kFacetTags) {
      if (out.count(f) < m) return "expected " + std::to_string(m) + " " + f + " lines";
    }
    return std::nullopt;
  };
  const auto resp = gateway.complete(llm::tags::kPersonaGenerate, b, opts);
  const auto& out = *resp.parsed;

  std::vector<Persona> personas;
  for (std::size_t i = 0; i < m; ++i) {
    Persona p;
    p.age = static_cast<int>(out.integer("AGE", i));
    p.occupation = out.text("OCCUPATION", i);
    for (const auto& o : vocab.occupations) {
      if (lower(o) == lower(p.occupation)) p.occupation = o;
    }
    for (std::size_t f = 0; f < kFacetTags.size(); ++f) {
      p.big_five[f] = static_cast<int>(out.integer(kFacetTags[f], i));
    }
    p.taste_summary = taste_summary;
    validate_persona(p, vocab);
    personas.push_back(std::move(p));
  }
  return personas;
}

ConsistencyScore self_consistency_score(const llm::LlmGateway& gateway, const Persona& persona,
                                        std::size_t persona_index, const UserId& user,
                                        std::span<const Interaction> own_history,
                                        std::span<const Interaction> others_pool,
                                        const ItemTable& items, const PersonaConfig& config) {
  const std::size_t rho = config.subset_size;
  if (rho == 0) throw ValidationError("subset size must be positive");
  if (own_history.size() < rho) {
    throw InsufficientDataError("user " + user + " has " + std::to_string(own_history.size()) +
                                " interactions, subsets need " + std::to_string(rho));
  }
  if (others_pool.size() < rho) {
    throw InsufficientDataError("other-user pool has fewer than " + std::to_string(rho) +
                                " interactions");
  }
  Rng rng(derive_seed(config.seed, "consistency:" + user));
  const std::string desc = persona.describe();

  ConsistencyScore cs;
  cs.persona_index = persona_index;
  for (std::size_t round = 0; round < config.subsets; ++round) {
    const auto own = pick(own_history, rng, rho);
    const auto other = pick(others_pool, rng, rho);
    auto rate = [&](const std::vector<Interaction>& subset, const char* which) {
      const llm::Bindings b{{"persona", desc},
                            {"item_type", config.item_type},
                            {"interactions", interaction_lines(subset, items)},
                            {"_subset", which},
                            {"_candidate", std::to_string(persona_index)},
                            {"_round", std::to_string(round)},
                            {"agent_id", user}};
      return static_cast<int>(
          gateway.complete(llm::tags::kPersonaRateSubset, b).parsed->integer("RATING"));
    };
    const int r_own = rate(own, "own");
    const int r_other = rate(other, "other");
    cs.per_subset.emplace_back(r_own, r_other);
    cs.score += r_own - r_other;
  }
  return cs;
}

std::size_t argmax_score(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("argmax over no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

PersonaMatch match_persona(const llm::LlmGateway& gateway, std::vector<Persona> candidates,
                           const UserId& user, std::span<const Interaction> own_history,
                           std::span<const Interaction> others_pool, const ItemTable& items,
                           const PersonaConfig& config) {
  if (candidates.empty()) throw ValidationError("match_persona needs at least one candidate");
  PersonaMatch m;
  m.user = user;
  std::vector<double> values;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    m.scores.push_back(self_consistency_score(gateway, candidates[i], i, user, own_history,
                                              others_pool, items, config));
    values.push_back(m.scores.back().score);
  }
  m.chosen = argmax_score(values);
  m.persona = candidates[m.chosen];
  m.candidates = std::move(candidates);
  return m;
}

PersonaMatch build_persona(const llm::LlmGateway& gateway, const UserId& user,
                           std::span<const Interaction> train, const ItemTable& items,
                           const PersonaVocab& vocab, const PersonaConfig& config) {
  std::vector<Interaction> own;
  std::vector<Interaction> others;
  for (const auto& r : train) (r.user_id == user ? own : others).push_back(r);
  std::sort(own.begin(), own.end(), time_order_less);
  if (own.empty()) throw InsufficientDataError("user " + user + " has no training interactions");

  const auto summary = summarize_tastes(gateway, own, items, config);
  auto candidates = generate_candidates(gateway, summary, own, items, vocab, config);
  auto m = match_persona(gateway, std::move(candidates), user, own, others, items, config);

  m.persona.pickiness = pickiness_level(user_average_rating(own));
  m.persona.habits = derive_habits(own, items, aggregated_ratings(train));
  return m;
}

nlohmann::json to_json(const Persona& p) {
  return {{"age", p.age},
          {"occupation", p.occupation},
          {"big_five", p.big_five},
          {"pickiness", std::string(pickiness_label(p.pickiness))},
          {"taste_summary", p.taste_summary},
          {"habits",
           {{"engagement", p.habits.engagement},
            {"conformity", p.habits.conformity},
            {"variety", p.habits.variety}}}};
}

Persona persona_from_json(const nlohmann::json& j) {
  Persona p;
  p.age = j.at("age").get<int>();
  p.occupation = j.at("occupation").get<std::string>();
  p.big_five = j.at("big_five").get<std::array<int, 5>>();
  p.pickiness = parse_pickiness(j.value("pickiness", std::string("moderately_picky")));
  p.taste_summary = j.value("taste_summary", std::string());
  if (j.contains("habits")) {
    const auto& h = j.at("habits");
    p.habits.engagement = h.value("engagement", 0L);
    p.habits.conformity = h.value("conformity", 0.0);
    p.habits.variety = h.value("variety", 0L);
  }
  for (int f : p.big_five) {
    if (f < 1 || f > 3) throw ValidationError("persona facet outside 1..3");
  }
  return p;
}

nlohmann::json to_json(const PersonaMatch& m) {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < m.candidates.size(); ++i) {
    nlohmann::json c = to_json(m.candidates[i]);
    if (i < m.scores.size()) {
      c["score"] = m.scores[i].score;
      nlohmann::json subs = nlohmann::json::array();
      for (auto [own, other] : m.scores[i].per_subset) subs.push_back({own, other});
      c["per_subset"] = subs;
    }
    cands.push_back(std::move(c));
  }
  return {{"user_id", m.user}, {"chosen", m.chosen}, {"persona", to_json(m.persona)},
          {"candidates", cands}};
}

}  // namespace simuser
