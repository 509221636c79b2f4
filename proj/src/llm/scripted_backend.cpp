#include "simuser/llm/scripted_backend.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "simuser/error.hpp"

namespace simuser::llm {

using nlohmann::json;

std::string interpolate(const std::string& text, const Bindings& bindings) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = bindings.find(text.substr(i + 1, close - i - 1));
        if (it != bindings.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::size_t embedding_dim)
    : embedder_(embedding_dim) {
  for (auto& r : rules) {
    CompiledRule c;
    for (const auto& [name, pattern] : r.match) {
      try {
        c.patterns.emplace_back(name, std::regex(pattern, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        throw ValidationError("invalid match regex '" + pattern + "' in rule for " + r.tag);
      }
    }
    c.rule = std::move(r);
    rules_.push_back(std::move(c));
  }
}

ScriptedBackend ScriptedBackend::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("script is not valid JSON: ") + e.what());
  }
  std::size_t dim = 64;
  json rules_doc = doc;
  if (doc.is_object()) {
    dim = doc.value("embedding_dim", std::size_t{64});
    rules_doc = doc.at("rules");
  }
  if (!rules_doc.is_array()) throw ValidationError("script must be a JSON list of rules");
  std::vector<ScriptRule> rules;
  for (const auto& r : rules_doc) {
    ScriptRule rule;
    rule.tag = r.at("tag").get<std::string>();
    if (r.contains("match")) {
      for (const auto& [name, pattern] : r.at("match").items()) {
        rule.match.emplace_back(name, pattern.get<std::string>());
      }
    }
    rule.responses = r.at("responses").get<std::vector<std::string>>();
    rule.cycle = r.value("cycle", false);
    rules.push_back(std::move(rule));
  }
  return ScriptedBackend(std::move(rules), dim);
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ScriptedBackend::generate(const GenerationRequest& request) {
  static const Bindings kEmpty;
  const Bindings& bindings = request.bindings ? *request.bindings : kEmpty;

  const auto agent = bindings.find("agent_id");
  const std::string stream = agent == bindings.end() ? std::string() : agent->second;

  std::lock_guard lock(mutex_);
  CompiledRule* best = nullptr;
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& r = rules_[i];
    if (r.rule.tag != request.tag) continue;
    if (r.rule.responses.empty()) continue;
    if (!r.rule.cycle && r.next[stream] >= r.rule.responses.size()) continue;
    bool ok = true;
    for (const auto& [name, re] : r.patterns) {
      auto it = bindings.find(name);
      if (it == bindings.end() || !std::regex_search(it->second, re)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (best == nullptr || r.patterns.size() > best->patterns.size()) {
      best = &r;
      best_index = i;
    }
  }
  if (best == nullptr) {
    throw ScriptExhaustedError("no script rule left for template '" + request.tag + "'");
  }
  const auto& responses = best->rule.responses;
  auto& next = best->next[stream];
  const std::string& raw = responses[next % responses.size()];
  ++next;
  std::string reply = interpolate(raw, bindings);
  log_.push_back({request.tag, request.prompt, request.attempt, best_index, reply});
  return reply;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<CallRecord> ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace simuser::llm
