#include "simuser/llm/http_backend.hpp"

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <regex>

#include "httplib.h"

#include "simuser/error.hpp"

namespace simuser::llm {

using nlohmann::json;

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ValidationError("unsupported endpoint URL: " + url);
  return {m.str(1), m.str(2).empty() ? "/" : m.str(2)};
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig c;
  c.endpoint = env_or("LLM_ENDPOINT");
  if (c.endpoint.empty()) throw ValidationError("LLM_ENDPOINT is not set");
  c.model = env_or("LLM_MODEL", "gpt-4o-mini");
  c.api_key = env_or("LLM_API_KEY");
  c.embed_endpoint = env_or("EMBED_ENDPOINT");
  c.embed_model = env_or("EMBED_MODEL", "text-embedding-3-small");
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
  if (!config_.embed_endpoint.empty()) split_url(config_.embed_endpoint);
}

std::string HttpBackend::post_json(const std::string& url, const std::string& body) const {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(u.path, headers, body, "application/json");
  if (!res) {
    throw LlmTransportError("request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw LlmTransportError("request to " + url + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::string HttpBackend::generate(const GenerationRequest& request) {
  json content;
  if (request.image_ref) {
    content = json::array({json{{"type", "text"}, {"text", request.prompt}},
                           json{{"type", "image_url"}, {"image_url", {{"url", *request.image_ref}}}}});
  } else {
    content = request.prompt;
  }
  json body{{"model", config_.model},
            {"messages", json::array({json{{"role", "user"}, {"content", content}}})}};
  if (config_.temperature) body["temperature"] = *config_.temperature;

  const std::string raw = post_json(config_.endpoint, body.dump());
  try {
    const json reply = json::parse(raw);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw LlmTransportError(std::string("malformed chat response: ") + e.what());
  }
}

EmbeddingVector HttpBackend::embed(std::string_view text) {
  if (config_.embed_endpoint.empty()) return fallback_embedder_.embed(text);
  json body{{"model", config_.embed_model}, {"input", std::string(text)}};
  const std::string raw = post_json(config_.embed_endpoint, body.dump());
  try {
    const json reply = json::parse(raw);
    return EmbeddingVector{reply.at("data").at(0).at("embedding").get<std::vector<double>>()};
  } catch (const json::exception& e) {
    throw LlmTransportError(std::string("malformed embedding response: ") + e.what());
  }
}

}  // namespace simuser::llm
