#include "simuser/llm/output_schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>

#include "simuser/error.hpp"

namespace simuser::llm {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_value(std::string_view v) {
  auto junk = [](unsigned char c) { return std::isspace(c) || c == '*' || c == '`'; };
  std::size_t b = 0, e = v.size();
  while (b < e && junk(v[b])) ++b;
  while (e > b && (junk(v[e - 1]) || v[e - 1] == ',' || v[e - 1] == ';')) --e;
  return std::string(v.substr(b, e - b));
}

std::optional<long> leading_integer(const std::string& v) {
  std::size_t i = 0;
  if (i < v.size() && (v[i] == '+' || v[i] == '-')) ++i;
  const std::size_t digits_start = i;
  while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) ++i;
  if (i == digits_start) return std::nullopt;
  // "4.5" is not an integer answer.
  if (i + 1 < v.size() && v[i] == '.' && std::isdigit(static_cast<unsigned char>(v[i + 1]))) {
    return std::nullopt;
  }
  return std::strtol(v.c_str(), nullptr, 10);
}

std::optional<double> leading_real(const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || !std::isfinite(d)) return std::nullopt;
  return d;
}

std::string escape_regex(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

FieldSpec FieldSpec::text(std::string name, std::string hint) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::Text;
  f.hint = std::move(hint);
  return f;
}

FieldSpec FieldSpec::integer(std::string name, long lo, long hi) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::Integer;
  f.min_int = lo;
  f.max_int = hi;
  f.hint = std::to_string(lo) + "-" + std::to_string(hi);
  return f;
}

FieldSpec FieldSpec::real(std::string name, std::string hint) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::Real;
  f.hint = std::move(hint);
  return f;
}

FieldSpec FieldSpec::choice(std::string name, std::vector<std::string> choices) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::Choice;
  for (auto& c : choices) f.choices.push_back(normalize_choice(c));
  std::string hint;
  for (std::size_t i = 0; i < f.choices.size(); ++i) {
    if (i) hint += " | ";
    hint += f.choices[i];
  }
  f.hint = hint;
  return f;
}

FieldSpec FieldSpec::list(std::string name, std::string hint) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::List;
  f.hint = std::move(hint);
  return f;
}

bool ParsedOutput::has(std::string_view name) const { return count(name) > 0; }

std::size_t ParsedOutput::count(std::string_view name) const {
  auto it = fields_.find(upper(name));
  return it == fields_.end() ? 0 : it->second.size();
}

const std::string& ParsedOutput::text(std::string_view name, std::size_t occurrence) const {
  auto it = fields_.find(upper(name));
  if (it == fields_.end() || occurrence >= it->second.size()) {
    throw LlmFormatError("reply has no field " + std::string(name));
  }
  return it->second[occurrence];
}

std::vector<std::string> ParsedOutput::all(std::string_view name) const {
  auto it = fields_.find(upper(name));
  return it == fields_.end() ? std::vector<std::string>{} : it->second;
}

long ParsedOutput::integer(std::string_view name, std::size_t occurrence) const {
  auto v = leading_integer(text(name, occurrence));
  if (!v) throw LlmFormatError("field " + std::string(name) + " is not an integer");
  return *v;
}

double ParsedOutput::real(std::string_view name, std::size_t occurrence) const {
  auto v = leading_real(text(name, occurrence));
  if (!v) throw LlmFormatError("field " + std::string(name) + " is not a number");
  return *v;
}

std::vector<std::string> ParsedOutput::list(std::string_view name, std::size_t occurrence) const {
  if (count(name) <= occurrence) return {};
  return split_list(text(name, occurrence));
}

std::optional<std::string> ParsedOutput::text_or(std::string_view name) const {
  if (!has(name)) return std::nullopt;
  return text(name);
}

void ParsedOutput::add(const std::string& name, std::string value) {
  fields_[upper(name)].push_back(std::move(value));
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string t = strip_value(cur);
    while (!t.empty() && (t.front() == '[' || t.front() == '"' || t.front() == '\'')) t.erase(0, 1);
    while (!t.empty() && (t.back() == ']' || t.back() == '"' || t.back() == '\'')) t.pop_back();
    if (!t.empty()) out.push_back(std::move(t));
    cur.clear();
  };
  for (char c : value) {
    if (c == ',' || c == ';' || c == '\n') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  if (out.size() == 1) {
    const std::string u = upper(out[0]);
    if (u == "NONE" || u == "N/A" || u == "NOTHING" || u == "-") out.clear();
  }
  return out;
}

std::string normalize_choice(std::string_view value) {
  std::string s = strip_value(value);
  while (!s.empty() && (s.front() == '[' || s.front() == '"' || s.front() == '(')) s.erase(0, 1);
  while (!s.empty() && (s.back() == ']' || s.back() == '"' || s.back() == ')' || s.back() == '.')) {
    s.pop_back();
  }
  for (auto& c : s) {
    if (c == ' ' || c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

std::optional<std::string> OutputSchema::parse(std::string_view raw, ParsedOutput& out) const {
  out = ParsedOutput{};
  if (fields_.empty()) return std::nullopt;

  std::string alternatives;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) alternatives += "|";
    alternatives += escape_regex(fields_[i].name);
  }
  const std::regex tag_re("(^|[^A-Za-z0-9_])(" + alternatives + ")[ \\t]*:",
                          std::regex::icase | std::regex::ECMAScript);

  const std::string text(raw);
  struct Hit {
    std::size_t tag_begin;
    std::size_t value_begin;
    std::string name;
  };
  std::vector<Hit> hits;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), tag_re); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    hits.push_back({static_cast<std::size_t>(m.position(2)),
                    static_cast<std::size_t>(m.position(0) + m.length(0)), upper(m.str(2))});
  }

  ParsedOutput collected;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t end = i + 1 < hits.size() ? hits[i + 1].tag_begin : text.size();
    collected.add(hits[i].name, strip_value(std::string_view(text).substr(
                                    hits[i].value_begin, end - hits[i].value_begin)));
  }

  for (const auto& spec : fields_) {
    auto values = collected.all(spec.name);
    if (values.empty()) {
      if (spec.required) return "missing field " + spec.name;
      continue;
    }
    if (!spec.repeated) values.resize(1);
    for (auto& v : values) {
      switch (spec.kind) {
        case FieldKind::Text:
          if (spec.required && v.empty()) return "field " + spec.name + " is empty";
          break;
        case FieldKind::Integer: {
          auto n = leading_integer(v);
          if (!n) return "field " + spec.name + " is not an integer: '" + v + "'";
          if (*n < spec.min_int || *n > spec.max_int) {
            return "field " + spec.name + " out of range " + spec.hint + ": " + v;
          }
          v = std::to_string(*n);
          break;
        }
        case FieldKind::Real: {
          auto d = leading_real(v);
          if (!d) return "field " + spec.name + " is not a number: '" + v + "'";
          if (*d < spec.min_real || *d > spec.max_real) {
            return "field " + spec.name + " out of range: " + v;
          }
          break;
        }
        case FieldKind::Choice: {
          std::string norm = normalize_choice(v);
          if (std::find(spec.choices.begin(), spec.choices.end(), norm) == spec.choices.end()) {
            return "field " + spec.name + " must be one of " + spec.hint + ", got '" + v + "'";
          }
          v = std::move(norm);
          break;
        }
        case FieldKind::List:
          break;
      }
      out.add(spec.name, std::move(v));
    }
  }
  return std::nullopt;
}

std::string OutputSchema::format_instructions() const {
  if (fields_.empty()) return {};
  std::string s = "Respond using exactly these tagged lines:\n";
  for (const auto& f : fields_) {
    s += f.name + ": <" + f.hint + ">";
    if (!f.required) s += " (optional)";
    if (f.repeated) s += " (repeat the line as needed)";
    s += "\n";
  }
  return s;
}

}  // namespace simuser::llm
