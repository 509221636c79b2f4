#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include "simuser/llm/backend.hpp"

namespace simuser::llm {

// One rule of a response script. A rule applies to calls whose template tag
// equals `tag` and whose bindings satisfy every regex in `match`
// (std::regex_search; an absent binding never matches).
struct ScriptRule {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> match;
  std::vector<std::string> responses;
  // When set, responses repeat from the start instead of running out.
  bool cycle = false;
};

struct CallRecord {
  std::string tag;
  std::string prompt;
  int attempt = 1;
  std::size_t rule_index = 0;
  std::string response;
};

// Deterministic offline backend. Each rule hands out its responses in order,
// separately for every agent_id binding, so concurrent agents do not perturb
// each other's scripts.
// Selection: among rules that match and still have responses, the one with
// the most regex constraints wins; ties go to the first registered. A rule
// whose responses are used up no longer matches; a call with no matching
// rule throws ScriptExhaustedError.
//
// Responses may reference bindings as {name}; known names are substituted,
// unknown ones are left verbatim.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules, std::size_t embedding_dim = 64);
  // Not thread-safe: the source must be idle.
  ScriptedBackend(ScriptedBackend&& other) noexcept
      : rules_(std::move(other.rules_)), embedder_(other.embedder_), log_(std::move(other.log_)) {}

  // Script file: JSON list of {tag, match: {binding: regex}, responses: [..], cycle},
  // or an object {"rules": [...], "embedding_dim": n}.
  static ScriptedBackend from_file(const std::filesystem::path& path);
  static ScriptedBackend from_json_text(const std::string& text);

  std::string generate(const GenerationRequest& request) override;
  EmbeddingVector embed(std::string_view text) override { return embedder_.embed(text); }
  std::string id() const override { return "scripted"; }

  std::size_t call_count() const;
  std::vector<CallRecord> calls() const;

 private:
  struct CompiledRule {
    ScriptRule rule;
    std::vector<std::pair<std::string, std::regex>> patterns;
    // Position in `responses` per agent_id binding ("" without one).
    std::map<std::string, std::size_t> next;
  };

  std::vector<CompiledRule> rules_;
  HashEmbedder embedder_;
  mutable std::mutex mutex_;
  std::vector<CallRecord> log_;
};

// Substitutes {name} from bindings, leaving unknown names untouched.
std::string interpolate(const std::string& text, const Bindings& bindings);

}  // namespace simuser::llm
