#pragma once

#include <optional>
#include <string>

#include "simuser/llm/backend.hpp"

namespace simuser::llm {

struct HttpBackendConfig {
  // Full chat-completion URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  std::string api_key;
  // Full embedding URL and model; embeddings fall back to the hash embedder
  // when no endpoint is configured.
  std::string embed_endpoint;
  std::string embed_model;
  std::optional<double> temperature;
  int timeout_seconds = 120;

  // Reads LLM_ENDPOINT, LLM_MODEL, LLM_API_KEY, EMBED_ENDPOINT, EMBED_MODEL.
  // Throws ValidationError when LLM_ENDPOINT is unset.
  static HttpBackendConfig from_env();
};

// Chat-completion style JSON over HTTP(S):
//   POST {"model", "messages": [{"role": "user", "content": ...}], "temperature"}
//   -> {"choices": [{"message": {"content": "..."}}]}
// Embeddings: POST {"model", "input"} -> {"data": [{"embedding": [...]}]}
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string generate(const GenerationRequest& request) override;
  EmbeddingVector embed(std::string_view text) override;
  std::string id() const override { return "http:" + config_.model; }

 private:
  std::string post_json(const std::string& url, const std::string& body) const;

  HttpBackendConfig config_;
  HashEmbedder fallback_embedder_;
};

}  // namespace simuser::llm
