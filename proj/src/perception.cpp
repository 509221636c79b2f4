#include "simuser/perception.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"

namespace simuser {

namespace {

std::string fmt_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

double clamp_prob(double p, const char* which, const std::string& claim) {
  if (p < 0.0 || p > 1.0) {
    spdlog::warn("{} probability {} for claim '{}' clamped into [0, 1]", which, p, claim);
    return std::clamp(p, 0.0, 1.0);
  }
  return p;
}

}  // namespace

std::string draft_caption(const llm::LlmGateway& gateway, const Item& item,
                          const PerceptionConfig& config) {
  if (!item.thumbnail_ref || item.thumbnail_ref->empty()) {
    throw NoThumbnailError("item " + item.id + " has no thumbnail");
  }
  const llm::Bindings b{{"item_type", config.item_type}, {"title", item.title}, {"_item", item.id}};
  llm::CompleteOptions opts;
  opts.image_ref = *item.thumbnail_ref;
  return gateway.complete(llm::tags::kCaptionDraft, b, opts).parsed->text("CAPTION");
}

std::vector<AtomicClaim> decompose_claims(const llm::LlmGateway& gateway, const std::string& draft,
                                          const PerceptionConfig& config) {
  if (draft.empty()) throw ValidationError("cannot decompose an empty caption");
  const llm::Bindings b{{"draft", draft}, {"max_claims", std::to_string(config.max_claims)}};
  std::vector<AtomicClaim> claims;
  for (auto& text : gateway.complete(llm::tags::kCaptionClaims, b).parsed->all("CLAIM")) {
    if (claims.size() == config.max_claims) break;
    claims.push_back({std::move(text), 0, 0});
  }
  return claims;
}

std::pair<double, double> score_claim(const llm::LlmGateway& gateway, const std::string& claim,
                                      const std::string& thumbnail_ref) {
  const llm::Bindings b{{"question", "Is the following statement true? " + claim},
                        {"_claim", claim}};
  llm::CompleteOptions opts;
  if (!thumbnail_ref.empty()) opts.image_ref = thumbnail_ref;
  const auto out = *gateway.complete(llm::tags::kCaptionScore, b, opts).parsed;
  const double yes = clamp_prob(out.real("YES"), "yes", claim);
  double no;
  if (out.has("NO")) {
    no = clamp_prob(out.real("NO"), "no", claim);
  } else {
    spdlog::info("no-probability missing for claim '{}', using the complement", claim);
    no = 1.0 - yes;
  }
  if (yes + no > 1.0 + 1e-9) {
    const double s = yes + no;
    return {yes / s, no / s};
  }
  return {yes, no};
}

std::string combine_caption(const llm::LlmGateway& gateway, const std::string& draft,
                            std::span<const AtomicClaim> claims, const PerceptionConfig& config) {
  if (claims.empty()) return draft;
  std::string scored;
  std::string removals;
  for (const auto& c : claims) {
    scored += "- " + c.text + " (p_yes " + fmt_prob(c.p_yes) + ", p_no " + fmt_prob(c.p_no) + ")\n";
    if (c.p_yes < config.removal_threshold) {
      removals += "Remove this unsupported claim: \"" + c.text + "\"\n";
    }
  }
  const llm::Bindings b{{"draft", draft}, {"scored_claims", scored}, {"removals", removals}};
  return gateway.complete(llm::tags::kCaptionCombine, b).parsed->text("CAPTION");
}

Caption caption_item(const llm::LlmGateway& gateway, const Item& item,
                     const PerceptionConfig& config) {
  Caption c;
  c.item_id = item.id;
  c.backend = gateway.backend().id();
  c.draft = draft_caption(gateway, item, config);
  c.thumbnail_ref = *item.thumbnail_ref;
  c.claims = decompose_claims(gateway, c.draft, config);
  for (auto& claim : c.claims) std::tie(claim.p_yes, claim.p_no) = score_claim(gateway, claim.text, c.thumbnail_ref);
  c.final_caption = combine_caption(gateway, c.draft, c.claims, config);
  return c;
}

nlohmann::json to_json(const Caption& c) {
  nlohmann::json claims = nlohmann::json::array();
  for (const auto& a : c.claims) claims.push_back({{"text", a.text}, {"p_yes", a.p_yes}, {"p_no", a.p_no}});
  return {{"item_id", c.item_id}, {"thumbnail_ref", c.thumbnail_ref}, {"backend", c.backend},
          {"draft", c.draft},     {"claims", claims},                 {"final", c.final_caption}};
}

Caption caption_from_json(const nlohmann::json& j) {
  Caption c;
  c.item_id = j.at("item_id").get<std::string>();
  c.thumbnail_ref = j.value("thumbnail_ref", std::string());
  c.backend = j.value("backend", std::string());
  c.draft = j.at("draft").get<std::string>();
  for (const auto& a : j.value("claims", nlohmann::json::array())) {
    c.claims.push_back({a.at("text").get<std::string>(), std::clamp(a.value("p_yes", 0.0), 0.0, 1.0),
                        std::clamp(a.value("p_no", 0.0), 0.0, 1.0)});
  }
  c.final_caption = j.at("final").get<std::string>();
  return c;
}

CaptionCache::CaptionCache(CaptionCache&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  entries_ = std::move(other.entries_);
}

CaptionCache& CaptionCache::operator=(CaptionCache&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = std::move(other.entries_);
  }
  return *this;
}

CaptionCache CaptionCache::load(const std::filesystem::path& path) {
  CaptionCache cache;
  std::ifstream in(path);
  if (!in) return cache;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      cache.put(caption_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
  }
  return cache;
}

void CaptionCache::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  std::ofstream out(path);
  if (!out) throw IOError("cannot write caption cache " + path.string());
  for (const auto& [key, c] : entries_) out << to_json(c).dump() << '\n';
}

std::optional<Caption> CaptionCache::get(const ItemId& item, const std::string& thumbnail,
                                         const std::string& backend) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({item, thumbnail, backend});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CaptionCache::put(const Caption& c) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign({c.item_id, c.thumbnail_ref, c.backend}, c);
}

std::size_t CaptionCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::map<ItemId, std::string> CaptionCache::finals() const {
  std::lock_guard lock(mutex_);
  std::map<ItemId, std::string> out;
  for (const auto& [key, c] : entries_) out[c.item_id] = c.final_caption;
  return out;
}

CaptionBatch caption_items(const llm::LlmGateway& gateway, std::span<const Item> items,
                           CaptionCache& cache, const PerceptionConfig& config,
                           std::size_t workers) {
  const std::size_t calls_before = gateway.provider_calls();
  std::vector<std::optional<Caption>> slots(items.size());
  std::vector<std::string> errors(items.size());
  std::atomic<std::size_t> next{0};
  const std::string backend = gateway.backend().id();

  auto work = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      const Item& item = items[i];
      if (!item.thumbnail_ref || item.thumbnail_ref->empty()) {
        errors[i] = "no thumbnail";
        continue;
      }
      if (auto hit = cache.get(item.id, *item.thumbnail_ref, backend)) {
        slots[i] = std::move(hit);
        continue;
      }
      try {
        slots[i] = caption_item(gateway, item, config);
        cache.put(*slots[i]);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::max<std::size_t>(1, workers); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  CaptionBatch batch;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      batch.captions.push_back(std::move(*slots[i]));
    } else {
      batch.skipped.emplace_back(items[i].id, errors[i]);
    }
  }
  batch.provider_calls = gateway.provider_calls() - calls_before;
  return batch;
}

}  // namespace simuser
