#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "simuser/llm/output_schema.hpp"

namespace simuser::llm {

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  std::string tag;
  // Text with {name} placeholders; "{{" and "}}" are literal braces.
  std::string body;
  OutputSchema schema;

  std::vector<std::string> placeholders() const;
  // Substitutes placeholders and appends the schema's format instructions.
  // Throws ValidationError when a placeholder has no binding. Extra bindings
  // are allowed; backends may match on them without them reaching the prompt.
  std::string render(const Bindings& bindings) const;
};

class PromptRegistry {
 public:
  // Throws ValidationError on a duplicate tag.
  void add(PromptTemplate tmpl);
  // Replaces an existing template (or adds it).
  void put(PromptTemplate tmpl);
  bool contains(const std::string& tag) const { return templates_.count(tag) != 0; }
  const PromptTemplate& get(const std::string& tag) const;
  std::vector<std::string> tags() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// Every template the simulator uses, keyed by the tags in prompts.hpp.
std::shared_ptr<const PromptRegistry> default_prompt_registry();

}  // namespace simuser::llm
