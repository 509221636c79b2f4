#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace simuser::llm {

enum class FieldKind {
  Text,     // free text, non-empty when required
  Integer,  // leading integer within [min_int, max_int]
  Real,     // leading number within [min_real, max_real]
  Choice,   // one of `choices`, normalized to upper case
  List,     // comma/semicolon separated tokens; "none" or blank means empty
};

struct FieldSpec {
  std::string name;  // tag as it appears in the reply, e.g. "RATING"
  FieldKind kind = FieldKind::Text;
  bool required = true;
  bool repeated = false;
  long min_int = 0;
  long max_int = 0;
  double min_real = -1e300;
  double max_real = 1e300;
  std::vector<std::string> choices;
  std::string hint;  // placeholder shown in the format instructions

  static FieldSpec text(std::string name, std::string hint = "text");
  static FieldSpec integer(std::string name, long lo, long hi);
  static FieldSpec real(std::string name, std::string hint = "number");
  static FieldSpec choice(std::string name, std::vector<std::string> choices);
  static FieldSpec list(std::string name, std::string hint = "comma-separated list");

  FieldSpec& optional() {
    required = false;
    return *this;
  }
  FieldSpec& many() {
    repeated = true;
    return *this;
  }
};

// Validated reply: field name -> values in order of appearance.
class ParsedOutput {
 public:
  bool has(std::string_view name) const;
  std::size_t count(std::string_view name) const;
  const std::string& text(std::string_view name, std::size_t occurrence = 0) const;
  std::vector<std::string> all(std::string_view name) const;
  long integer(std::string_view name, std::size_t occurrence = 0) const;
  double real(std::string_view name, std::size_t occurrence = 0) const;
  std::vector<std::string> list(std::string_view name, std::size_t occurrence = 0) const;
  std::optional<std::string> text_or(std::string_view name) const;

  void add(const std::string& name, std::string value);
  const std::map<std::string, std::vector<std::string>>& fields() const { return fields_; }

 private:
  std::map<std::string, std::vector<std::string>> fields_;
};

// Structural contract for a reply: tagged fields "NAME: value", either one per
// line or several inline ("RATING: 5, FEELING: loved it").
class OutputSchema {
 public:
  OutputSchema() = default;
  OutputSchema(std::initializer_list<FieldSpec> fields) : fields_(fields) {}

  const std::vector<FieldSpec>& fields() const { return fields_; }

  // Parses and validates. Returns the error description on failure.
  std::optional<std::string> parse(std::string_view raw, ParsedOutput& out) const;

  // Text appended to rendered prompts describing the reply format.
  std::string format_instructions() const;

 private:
  std::vector<FieldSpec> fields_;
};

// Splits a List field value into trimmed tokens.
std::vector<std::string> split_list(std::string_view value);

// Upper-case, spaces and dashes to underscores, surrounding brackets removed.
std::string normalize_choice(std::string_view value);

}  // namespace simuser::llm
