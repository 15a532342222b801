#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "swefixer/backend.hpp"
#include "swefixer/error.hpp"

namespace swefixer {

struct ChatBackendConfig {
  std::string name = "chat";
  std::string endpoint;          // e.g. https://host/v1/chat/completions
  std::string model;
  std::string token_env = "SWEFIXER_API_KEY";
  std::string system_prompt;     // optional system message
  double timeout_seconds = 600;
  std::size_t max_context_tokens = 65536;
  int max_output_tokens = 4096;
};

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorKind::Config, "endpoint must include a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// Chat-completions client: POSTs {model, messages, temperature, max_tokens}
/// and returns choices[0].message.content. Connection failures and non-2xx
/// replies are transport errors.
class ChatCompletionsBackend : public ModelBackend {
 public:
  explicit ChatCompletionsBackend(ChatBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) fail(ErrorKind::Config, "backend " + config_.name + " has no endpoint");
    endpoint_ = split_endpoint(config_.endpoint);
  }

  std::string name() const override { return config_.name; }
  std::size_t max_context_tokens() const override { return config_.max_context_tokens; }

  nlohmann::json request_body(const GenerateRequest& request) const {
    auto messages = nlohmann::json::array();
    if (!config_.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    return {{"model", config_.model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", config_.max_output_tokens}};
  }

  std::string complete(const GenerateRequest& request) override {
    httplib::Client client(endpoint_.scheme_host_port);
    auto secs = static_cast<time_t>(config_.timeout_seconds);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);
    httplib::Headers headers;
    if (!config_.token_env.empty()) {
      if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }
    auto res = client.Post(endpoint_.path, headers, request_body(request).dump(), "application/json");
    if (!res) fail(ErrorKind::Backend, config_.name + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
      fail(ErrorKind::Backend, config_.name + ": HTTP " + std::to_string(res->status));
    }
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded()) fail(ErrorKind::Backend, config_.name + ": reply is not JSON");
    try {
      return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Backend, config_.name + ": reply lacks choices[0].message.content");
    }
  }

 private:
  ChatBackendConfig config_;
  Endpoint endpoint_;
};

}  // namespace swefixer
