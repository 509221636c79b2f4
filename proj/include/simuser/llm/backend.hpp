#pragma once

#include <optional>
#include <string>

#include "simuser/llm/embedding.hpp"
#include "simuser/llm/prompt_registry.hpp"

namespace simuser::llm {

struct GenerationRequest {
  std::string tag;
  std::string prompt;
  const Bindings* bindings = nullptr;
  int attempt = 1;
  // Opaque image reference (path or URL) for multimodal calls.
  std::optional<std::string> image_ref;
};

// A text-generation + embedding provider. Implementations must be safe for
// concurrent calls.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;
  virtual std::string id() const = 0;
};

}  // namespace simuser::llm
