#include "simuser/llm/prompt_registry.hpp"

#include "simuser/error.hpp"

namespace simuser::llm {

namespace {

template <typename OnText, typename OnPlaceholder>
void scan(const std::string& body, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
      on_text('{');
      i += 2;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      on_text('}');
      i += 2;
    } else if (c == '{') {
      const auto close = body.find('}', i + 1);
      if (close == std::string::npos) {
        throw ValidationError("unterminated placeholder in template body");
      }
      on_placeholder(body.substr(i + 1, close - i - 1));
      i = close + 1;
    } else {
      on_text(c);
      ++i;
    }
  }
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  scan(
      body, [](char) {},
      [&](const std::string& name) {
        for (const auto& n : names) {
          if (n == name) return;
        }
        names.push_back(name);
      });
  return names;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  std::string out;
  out.reserve(body.size() * 2);
  scan(
      body, [&](char c) { out.push_back(c); },
      [&](const std::string& name) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw ValidationError("template '" + tag + "' placeholder {" + name + "} is unbound");
        }
        out += it->second;
      });
  const std::string fmt = schema.format_instructions();
  if (!fmt.empty()) {
    out += "\n\n";
    out += fmt;
  }
  return out;
}

void PromptRegistry::add(PromptTemplate tmpl) {
  const std::string tag = tmpl.tag;
  if (!templates_.emplace(tag, std::move(tmpl)).second) {
    throw ValidationError("duplicate prompt template tag " + tag);
  }
}

void PromptRegistry::put(PromptTemplate tmpl) {
  const std::string tag = tmpl.tag;
  templates_.insert_or_assign(tag, std::move(tmpl));
}

const PromptTemplate& PromptRegistry::get(const std::string& tag) const {
  auto it = templates_.find(tag);
  if (it == templates_.end()) throw ValidationError("no prompt template registered for " + tag);
  return it->second;
}

std::vector<std::string> PromptRegistry::tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, t] : templates_) out.push_back(tag);
  return out;
}

}  // namespace simuser::llm
