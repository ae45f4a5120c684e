// Copyright 2026 The RareScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "rarescale/error.h"
#include "rarescale/llm_gateway.h"

namespace rarescale {
namespace {

constexpr const char* kContentBlocksVersion = "2023-06-01";

struct Failure {
  ErrorCode code;
  std::string message;
  bool retryable;
  int retry_after_ms;
};

}  // namespace

nlohmann::json BuildProviderRequest(const LlmConfig& config,
                                    const ChatTurnRequest& request) {
  nlohmann::json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  if (config.dialect == Dialect::kMessages) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages) {
      messages.push_back({{"role", RoleName(m.role)}, {"content", m.text}});
    }
    body["messages"] = std::move(messages);
    return body;
  }
  // Content-blocks dialect: system text is hoisted to a top-level field.
  std::string system;
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    if (m.role == Role::kSystem) {
      if (!system.empty()) system += "\n\n";
      system += m.text;
      continue;
    }
    messages.push_back(
        {{"role", RoleName(m.role)},
         {"content", nlohmann::json::array({{{"type", "text"}, {"text", m.text}}})}});
  }
  if (!system.empty()) body["system"] = system;
  body["messages"] = std::move(messages);
  return body;
}

ChatTurnResponse ParseProviderResponse(Dialect dialect, const std::string& body) {
  ChatTurnResponse out;
  try {
    auto j = nlohmann::json::parse(body);
    if (dialect == Dialect::kMessages) {
      out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
    } else {
      const auto& blocks = j.at("content");
      if (!blocks.is_array() || blocks.empty()) {
        throw Error(ErrorCode::kMalformedResponse, "response has no content blocks");
      }
      for (const auto& block : blocks) {
        if (block.value("type", "") == "text") out.text += block.at("text").get<std::string>();
      }
      if (j.contains("usage")) {
        out.usage.prompt_tokens = j["usage"].value("input_tokens", 0);
        out.usage.completion_tokens = j["usage"].value("output_tokens", 0);
      }
    }
    out.model = j.value("model", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse,
                std::string("malformed provider response: ") + e.what());
  }
  return out;
}

RemoteClient::RemoteClient(LlmConfig config)
    : RemoteClient(config, std::make_shared<RateLimiter>(config.requests_per_minute)) {}

RemoteClient::RemoteClient(LlmConfig config, std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)),
      limiter_(std::move(limiter)),
      gate_(config_.max_in_flight) {
  config_.backend = Backend::kRemote;
  config_.Validate();
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, kUrl)) {
    throw Error(ErrorCode::kConfig, "endpoint must be an http(s) URL");
  }
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr) {
      throw Error(ErrorCode::kConfig,
                  "environment variable '" + config_.api_key_env + "' is not set");
    }
    api_key_ = key;
  }
}

ChatTurnResponse RemoteClient::Complete(const ChatTurnRequest& request) {
  request.Validate();
  const std::string body = BuildProviderRequest(config_, request).dump();
  httplib::Headers headers;
  if (!api_key_.empty()) {
    if (config_.dialect == Dialect::kMessages) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    } else {
      headers.emplace("x-api-key", api_key_);
    }
  }
  if (config_.dialect == Dialect::kContentBlocks) {
    headers.emplace("anthropic-version", kContentBlocksVersion);
  }

  Failure last{ErrorCode::kTransport, "no attempt made", false, 0};
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      long long backoff = static_cast<long long>(config_.initial_backoff_ms)
                          << std::min(attempt - 1, 20);
      backoff = std::max<long long>(backoff, last.retry_after_ms);
      backoff = std::min<long long>(backoff, config_.max_backoff_ms);
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    limiter_->Acquire();

    httplib::Client client(scheme_host_port_);
    auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    gate_.Enter();
    auto result = client.Post(path_, headers, body, "application/json");
    gate_.Leave();

    if (!result) {
      last = {ErrorCode::kTransport,
              "transport failure: " + httplib::to_string(result.error()), true, 0};
    } else if (result->status >= 200 && result->status < 300) {
      ChatTurnResponse response = ParseProviderResponse(config_.dialect, result->body);
      response.retry_count = attempt;
      if (response.model.empty()) response.model = config_.model;
      return response;
    } else {
      std::string snippet = Redact(result->body.substr(0, 200), api_key_);
      std::string message = "HTTP " + std::to_string(result->status) + ": " + snippet;
      if (result->status == 429) {
        int retry_after_ms = 0;
        if (result->has_header("Retry-After")) {
          retry_after_ms = std::atoi(result->get_header_value("Retry-After").c_str()) * 1000;
        }
        last = {ErrorCode::kRateLimited, message, true, retry_after_ms};
      } else if (result->status >= 500) {
        last = {ErrorCode::kTransport, message, true, 0};
      } else {
        last = {ErrorCode::kTransport, message, false, 0};
      }
    }
    if (!last.retryable) break;
  }
  throw Error(last.code, Redact(last.message, api_key_) + " (after " +
                             std::to_string(config_.max_retries) + " retries)");
}

}  // namespace rarescale
