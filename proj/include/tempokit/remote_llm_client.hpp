#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tempokit/errors.hpp"
#include "tempokit/instruction_engine.hpp"

namespace tempokit {

struct RemoteClientConfig {
  std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
  std::string model;
  std::string auth_env = "TEMPOKIT_LLM_TOKEN";  // env var holding the bearer token
  int retries = 3;
  int timeout_seconds = 30;
  int backoff_ms = 100;  // doubled per retry
};

// Speaks a chat-style JSON endpoint: posts {model, messages:[{role:"user",
// content}]} and reads choices[0].message.content when the response is in
// that shape, otherwise returns the raw body. Transport failures and non-2xx
// responses retry with exponential backoff before raising ClientError.
class RemoteLlmClient final : public LlmClient {
 public:
  explicit RemoteLlmClient(RemoteClientConfig config) : config_(std::move(config)) {
    const std::size_t scheme = config_.endpoint.find("://");
    if (scheme == std::string::npos) {
      throw ValidationError("endpoint must include a scheme, got '" + config_.endpoint + "'");
    }
    const std::size_t path_start = config_.endpoint.find('/', scheme + 3);
    host_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  }

  std::string complete(const std::string& prompt) override {
    if (prompt.empty()) throw ValidationError("cannot complete an empty prompt");
    nlohmann::json payload = {
        {"model", config_.model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
    };
    const std::string body = payload.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      }
      httplib::Client http(host_);
      http.set_connection_timeout(config_.timeout_seconds, 0);
      http.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
      auto res = http.Post(path_, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      return extract_text(res->body);
    }
    throw ClientError("llm request to " + config_.endpoint + " failed: " + last_error,
                      config_.retries);
  }

 private:
  static std::string extract_text(const std::string& body) {
    const auto parsed = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_object()) {
      if (const auto it = parsed.find("choices");
          it != parsed.end() && it->is_array() && !it->empty()) {
        const auto& first = it->front();
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string()) {
          return first["message"]["content"].get<std::string>();
        }
      }
      if (parsed.contains("content") && parsed["content"].is_string()) {
        return parsed["content"].get<std::string>();
      }
    }
    return body;
  }

  RemoteClientConfig config_;
  std::string host_;
  std::string path_;
};

}  // namespace tempokit
