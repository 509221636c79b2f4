#include "simuser/llm/gateway.hpp"

#include <cmath>
#include <spdlog/spdlog.h>

#include "simuser/error.hpp"

namespace simuser::llm {

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend,
                       std::shared_ptr<const PromptRegistry> registry)
    : backend_(std::move(backend)), registry_(std::move(registry)) {
  if (!backend_) throw ValidationError("LlmGateway needs a backend");
  if (!registry_) throw ValidationError("LlmGateway needs a prompt registry");
}

std::string LlmGateway::call_backend(GenerationRequest& req) const {
  ++calls_;
  try {
    return backend_->generate(req);
  } catch (const LlmError&) {
    throw;
  } catch (const std::exception& e) {
    throw LlmTransportError(std::string("backend failure: ") + e.what());
  }
}

LlmResponse LlmGateway::complete(const std::string& tag, const Bindings& bindings,
                                 const CompleteOptions& options) const {
  const PromptTemplate& tmpl = registry_->get(tag);
  const std::string prompt = tmpl.render(bindings);

  auto check = [&](const std::string& raw, ParsedOutput& parsed) -> std::optional<std::string> {
    if (auto err = tmpl.schema.parse(raw, parsed)) return err;
    if (options.validator) return options.validator(parsed);
    return std::nullopt;
  };

  LlmResponse resp;
  resp.backend_id = backend_->id();

  GenerationRequest req{tag, prompt, &bindings, 1, options.image_ref};
  resp.raw_text = call_backend(req);
  ParsedOutput parsed;
  auto err = check(resp.raw_text, parsed);
  if (!err) {
    resp.parsed = std::move(parsed);
    return resp;
  }

  spdlog::debug("'{}' reply rejected ({}), re-prompting", tag, *err);
  resp.first_failure = *err;
  req.prompt = prompt + "\n\n" + std::string(kRetryInstruction);
  req.attempt = 2;
  resp.attempt = 2;
  resp.raw_text = call_backend(req);
  if (auto err2 = check(resp.raw_text, parsed)) {
    throw LlmFormatError("'" + tag + "' reply invalid after retry: " + *err2);
  }
  resp.parsed = std::move(parsed);
  return resp;
}

EmbeddingVector LlmGateway::embed(std::string_view text) const {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  EmbeddingVector v;
  try {
    v = backend_->embed(text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw LlmTransportError(std::string("embedding failure: ") + e.what());
  }
  if (v.dim() == 0 || !std::isfinite(v.norm())) {
    throw ValidationError("backend returned an invalid embedding");
  }
  std::size_t expected = 0;
  if (!embed_dim_.compare_exchange_strong(expected, v.dim()) && expected != v.dim()) {
    throw ValidationError("embedding dimension changed within a run: " + std::to_string(expected) +
                          " -> " + std::to_string(v.dim()));
  }
  return v;
}

}  // namespace simuser::llm
