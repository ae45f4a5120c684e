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

#ifndef RARESCALE_LLM_GATEWAY_H_
#define RARESCALE_LLM_GATEWAY_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rarescale {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

// Placeholders are written {name} with name matching [A-Za-z_][A-Za-z0-9_]*.
// "{{" and "}}" render as literal braces.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  // required_vars is taken from the placeholders found in body.
  PromptTemplate(std::string name, std::string body);
  PromptTemplate(std::string name, std::string body,
                 std::set<std::string> required_vars);

  const std::string& name() const { return name_; }
  const std::string& body() const { return body_; }
  const std::set<std::string>& required_vars() const { return required_vars_; }

  // Throws kMissingVariable or kUnknownPlaceholder naming the variable.
  std::string Render(const std::map<std::string, std::string>& vars) const;

  // Placeholder names in order of first appearance. Throws kParse on an
  // unbalanced brace.
  static std::vector<std::string> Placeholders(std::string_view body);

 private:
  std::string name_;
  std::string body_;
  std::set<std::string> required_vars_;
};

// Named template lookup. Defaults are compiled in; a directory may override
// any of them with <name>.txt files.
class TemplateSet {
 public:
  static TemplateSet Defaults();
  // Defaults, with every <name>.txt found in dir replacing its entry.
  static TemplateSet FromDirectory(const std::string& dir);

  const PromptTemplate& Get(const std::string& name) const;
  void Set(PromptTemplate t);
  std::vector<std::string> Names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Chat completion
// ---------------------------------------------------------------------------

enum class Role { kSystem, kUser, kAssistant };
std::string_view RoleName(Role role);

struct ChatMessageIn {
  Role role = Role::kUser;
  std::string text;
};

struct ChatTurnRequest {
  std::vector<ChatMessageIn> messages;

  // Convenience for single-prompt calls.
  static ChatTurnRequest FromPrompt(std::string prompt);
  // Throws kInvalidArgument when empty or opened by an assistant message.
  void Validate() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatTurnResponse {
  std::string text;
  Usage usage;
  int retry_count = 0;
  std::string model;
};

enum class Backend { kRemote, kMock };
// "messages" (system as a role) or "content-blocks" (top-level system string,
// typed content parts).
enum class Dialect { kMessages, kContentBlocks };

struct LlmConfig {
  Backend backend = Backend::kMock;
  Dialect dialect = Dialect::kMessages;
  std::string endpoint;        // full URL, e.g. https://host/v1/chat/completions
  std::string model = "mock";
  std::string api_key_env;     // name of the environment variable, never the key
  double temperature = 0.0;
  int max_tokens = 2048;
  int max_retries = 3;
  int timeout_ms = 60000;
  int initial_backoff_ms = 500;
  int max_backoff_ms = 30000;
  int requests_per_minute = 60;
  int max_in_flight = 4;
  std::string mock_script;     // path; empty selects the built-in script

  // Throws kConfig.
  void Validate() const;
};

nlohmann::json LlmConfigToJson(const LlmConfig& config);
// Fields missing from j keep the values already in base.
LlmConfig LlmConfigFromJson(const nlohmann::json& j, LlmConfig base = {});

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws on transport failure after retries, rate limiting, exhausted mock
  // script or a malformed provider response.
  virtual ChatTurnResponse Complete(const ChatTurnRequest& request) = 0;
  virtual std::string model_name() const = 0;
  virtual bool is_mock() const { return false; }
};

// Sliding one-minute window: Acquire blocks until fewer than `per_minute`
// acquisitions happened in the trailing 60 seconds. The clock and sleeper
// are injectable so tests can audit the schedule without waiting.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;
  using Sleeper = std::function<void(std::chrono::steady_clock::duration)>;

  explicit RateLimiter(int per_minute);
  RateLimiter(int per_minute, Clock clock, Sleeper sleeper);

  void Acquire();

 private:
  int per_minute_;
  Clock clock_;
  Sleeper sleeper_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> recent_;
};

// Counting semaphore with a runtime bound.
class InFlightGate {
 public:
  explicit InFlightGate(int limit) : available_(limit > 0 ? limit : 1) {}
  void Enter();
  void Leave();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

// A responder computes a reply from the request; options come from the
// script entry.
using Responder =
    std::function<std::string(const ChatTurnRequest&, const nlohmann::json& options)>;

class ResponderRegistry {
 public:
  void Register(std::string name, Responder responder);
  const Responder* Find(const std::string& name) const;

 private:
  std::map<std::string, Responder> responders_;
};

// One scripted reply. An entry fits a request when every matcher it sets
// holds: `contains` is a substring of the concatenated request text ("*"
// matches anything) and `ordinal` equals the 1-based call number. Entries
// are consumed once unless `repeat` is set.
struct MockEntry {
  std::string contains = "*";
  int ordinal = 0;  // 0 = any call
  std::string reply;
  std::string responder;  // name in the registry; used instead of reply
  nlohmann::json options = nlohmann::json::object();
  bool repeat = false;
};

struct MockScript {
  std::vector<MockEntry> entries;

  static MockScript FromJson(const nlohmann::json& j);
  static MockScript Load(const std::string& path);
};

class MockClient : public LlmClient {
 public:
  MockClient(MockScript script, std::string model = "mock",
             std::shared_ptr<const ResponderRegistry> registry = nullptr);

  ChatTurnResponse Complete(const ChatTurnRequest& request) override;
  std::string model_name() const override { return model_; }
  bool is_mock() const override { return true; }

  int call_count() const;
  std::vector<ChatTurnRequest> requests() const;

 private:
  MockScript script_;
  std::string model_;
  std::shared_ptr<const ResponderRegistry> registry_;
  mutable std::mutex mu_;
  std::vector<bool> consumed_;
  std::vector<ChatTurnRequest> requests_;
};

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

class RemoteClient : public LlmClient {
 public:
  // Reads the credential from config.api_key_env (may be empty for local
  // endpoints). Throws kConfig.
  explicit RemoteClient(LlmConfig config);
  RemoteClient(LlmConfig config, std::shared_ptr<RateLimiter> limiter);

  ChatTurnResponse Complete(const ChatTurnRequest& request) override;
  std::string model_name() const override { return config_.model; }

 private:
  LlmConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_;
  std::shared_ptr<RateLimiter> limiter_;
  InFlightGate gate_;
};

// Provider wire formats, exposed for tests.
nlohmann::json BuildProviderRequest(const LlmConfig& config,
                                    const ChatTurnRequest& request);
// Throws kMalformedResponse.
ChatTurnResponse ParseProviderResponse(Dialect dialect, const std::string& body);

// Replaces every occurrence of secret in text. No-op for an empty secret.
std::string Redact(std::string text, const std::string& secret);

// Remote client, or a mock client running config.mock_script (or the
// built-in script when empty) with the built-in responders.
std::unique_ptr<LlmClient> MakeClient(const LlmConfig& config);

}  // namespace rarescale

#endif  // RARESCALE_LLM_GATEWAY_H_
