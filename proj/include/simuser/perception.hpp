#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"

namespace simuser {

struct AtomicClaim {
  std::string text;
  double p_yes = 0;
  double p_no = 0;
};

struct Caption {
  ItemId item_id;
  std::string thumbnail_ref;
  std::string backend;
  std::string draft;
  std::vector<AtomicClaim> claims;
  std::string final_caption;
};

struct PerceptionConfig {
  double removal_threshold = 0.5;
  std::size_t max_claims = 6;
  std::string item_type = "movie";
};

// Throws NoThumbnailError when the item has no thumbnail reference.
std::string draft_caption(const llm::LlmGateway& gateway, const Item& item,
                          const PerceptionConfig& config = {});

// At most max_claims claims. Throws ValidationError on an empty draft and
// LlmFormatError when the reply has no claim after the retry.
std::vector<AtomicClaim> decompose_claims(const llm::LlmGateway& gateway, const std::string& draft,
                                          const PerceptionConfig& config = {});

// Both probabilities are clamped to [0, 1]; a missing NO becomes 1 - YES; a
// pair summing above 1 is rescaled to sum to 1.
std::pair<double, double> score_claim(const llm::LlmGateway& gateway, const std::string& claim,
                                      const std::string& thumbnail_ref);

// Claims below the removal threshold get an explicit removal line in the
// prompt. With no claims the draft is returned without an LLM call.
std::string combine_caption(const llm::LlmGateway& gateway, const std::string& draft,
                            std::span<const AtomicClaim> claims, const PerceptionConfig& config = {});

// Full pipeline for one item.
Caption caption_item(const llm::LlmGateway& gateway, const Item& item,
                     const PerceptionConfig& config = {});

nlohmann::json to_json(const Caption& c);
Caption caption_from_json(const nlohmann::json& j);

// Keyed by (item, thumbnail, backend); thread-safe.
class CaptionCache {
 public:
  CaptionCache() = default;
  CaptionCache(CaptionCache&& other) noexcept;
  CaptionCache& operator=(CaptionCache&& other) noexcept;
  // Missing file means an empty cache. Throws ParseError on a bad line.
  static CaptionCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::optional<Caption> get(const ItemId& item, const std::string& thumbnail,
                             const std::string& backend) const;
  void put(const Caption& c);
  std::size_t size() const;
  // Latest caption per item regardless of backend, for prompt assembly.
  std::map<ItemId, std::string> finals() const;

 private:
  using Key = std::tuple<ItemId, std::string, std::string>;
  mutable std::mutex mutex_;
  std::map<Key, Caption> entries_;
};

struct CaptionBatch {
  std::vector<Caption> captions;
  std::vector<std::pair<ItemId, std::string>> skipped;  // item, reason
  std::size_t provider_calls = 0;
};

// Captions every item with a thumbnail, in item order, through the cache.
// Items without a thumbnail or whose pipeline failed are reported in skipped.
CaptionBatch caption_items(const llm::LlmGateway& gateway, std::span<const Item> items,
                           CaptionCache& cache, const PerceptionConfig& config = {},
                           std::size_t workers = 1);

}  // namespace simuser
