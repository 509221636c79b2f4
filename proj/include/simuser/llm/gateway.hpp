#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "simuser/llm/backend.hpp"
#include "simuser/llm/output_schema.hpp"
#include "simuser/llm/prompt_registry.hpp"

namespace simuser::llm {

// Appended verbatim to the prompt when a reply violates its schema.
inline constexpr std::string_view kRetryInstruction =
    "You have one more chance to provide the correct answer";

struct LlmResponse {
  std::string raw_text;
  std::optional<ParsedOutput> parsed;
  std::string backend_id;
  int attempt = 1;
  // Why the first reply was rejected, when attempt == 2.
  std::string first_failure;
};

// Extra semantic checks on top of the schema (e.g. action legality). Returns
// an error description to trigger the retry, or nullopt to accept.
using ReplyValidator = std::function<std::optional<std::string>(const ParsedOutput&)>;

struct CompleteOptions {
  std::optional<std::string> image_ref;
  ReplyValidator validator;
};

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<LlmBackend> backend,
             std::shared_ptr<const PromptRegistry> registry = default_prompt_registry());

  // Renders the template, calls the backend, validates. On a schema or
  // validator violation re-prompts once with kRetryInstruction appended.
  // Throws LlmFormatError when the second reply also fails; backend errors
  // other than LlmError are wrapped in LlmTransportError.
  LlmResponse complete(const std::string& tag, const Bindings& bindings,
                       const CompleteOptions& options = {}) const;

  // Throws ValidationError on empty text or when the backend changes dimension.
  EmbeddingVector embed(std::string_view text) const;

  const PromptRegistry& registry() const { return *registry_; }
  LlmBackend& backend() const { return *backend_; }
  std::size_t provider_calls() const { return calls_.load(); }

 private:
  std::string call_backend(GenerationRequest& req) const;

  std::shared_ptr<LlmBackend> backend_;
  std::shared_ptr<const PromptRegistry> registry_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> embed_dim_{0};
};

}  // namespace simuser::llm
