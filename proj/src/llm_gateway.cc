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

#include "rarescale/llm_gateway.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "rarescale/error.h"

namespace rarescale {

// Generated from prompts/*.txt at configure time.
extern const std::vector<std::pair<std::string, std::string>>& EmbeddedPrompts();

namespace {

bool IsIdentStart(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool IsIdentChar(char c) { return IsIdentStart(c) || (c >= '0' && c <= '9'); }

struct Segment {
  bool is_var;
  std::string text;
};

std::vector<Segment> Tokenize(std::string_view body) {
  std::vector<Segment> out;
  std::string literal;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        literal += '{';
        ++i;
        continue;
      }
      std::size_t close = body.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kParse, "unbalanced '{' at offset " + std::to_string(i));
      }
      std::string_view name = body.substr(i + 1, close - i - 1);
      if (name.empty() || !IsIdentStart(name[0]) ||
          !std::all_of(name.begin(), name.end(), IsIdentChar)) {
        throw Error(ErrorCode::kParse,
                    "bad placeholder '{" + std::string(name) + "}'");
      }
      if (!literal.empty()) out.push_back({false, std::move(literal)});
      literal.clear();
      out.push_back({true, std::string(name)});
      i = close;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        literal += '}';
        ++i;
        continue;
      }
      throw Error(ErrorCode::kParse, "unbalanced '}' at offset " + std::to_string(i));
    } else {
      literal += c;
    }
  }
  if (!literal.empty()) out.push_back({false, std::move(literal)});
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)) {
  for (auto& v : Placeholders(body_)) required_vars_.insert(std::move(v));
}

PromptTemplate::PromptTemplate(std::string name, std::string body,
                               std::set<std::string> required_vars)
    : name_(std::move(name)),
      body_(std::move(body)),
      required_vars_(std::move(required_vars)) {
  Tokenize(body_);
}

std::vector<std::string> PromptTemplate::Placeholders(std::string_view body) {
  std::vector<std::string> names;
  for (auto& seg : Tokenize(body)) {
    if (seg.is_var && std::find(names.begin(), names.end(), seg.text) == names.end()) {
      names.push_back(std::move(seg.text));
    }
  }
  return names;
}

std::string PromptTemplate::Render(const std::map<std::string, std::string>& vars) const {
  for (const auto& required : required_vars_) {
    if (!vars.count(required)) {
      throw Error(ErrorCode::kMissingVariable,
                  "template '" + name_ + "': missing variable '" + required + "'");
    }
  }
  std::string out;
  for (const auto& seg : Tokenize(body_)) {
    if (!seg.is_var) {
      out += seg.text;
      continue;
    }
    if (!required_vars_.count(seg.text)) {
      throw Error(ErrorCode::kUnknownPlaceholder,
                  "template '" + name_ + "': unknown placeholder '" + seg.text + "'");
    }
    out += vars.at(seg.text);
  }
  return out;
}

TemplateSet TemplateSet::Defaults() {
  TemplateSet set;
  for (const auto& [name, body] : EmbeddedPrompts()) set.Set(PromptTemplate(name, body));
  return set;
}

TemplateSet TemplateSet::FromDirectory(const std::string& dir) {
  namespace fs = std::filesystem;
  TemplateSet set = Defaults();
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kConfig, "template directory '" + dir + "' not found");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    set.Set(PromptTemplate(path.stem().string(), buf.str()));
  }
  return set;
}

const PromptTemplate& TemplateSet::Get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorCode::kNotFound, "no prompt template named '" + name + "'");
  }
  return it->second;
}

void TemplateSet::Set(PromptTemplate t) {
  std::string key = t.name();
  templates_.insert_or_assign(std::move(key), std::move(t));
}

std::vector<std::string> TemplateSet::Names() const {
  std::vector<std::string> names;
  for (const auto& [name, t] : templates_) names.push_back(name);
  return names;
}

std::string_view RoleName(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

ChatTurnRequest ChatTurnRequest::FromPrompt(std::string prompt) {
  ChatTurnRequest req;
  req.messages.push_back({Role::kUser, std::move(prompt)});
  return req;
}

void ChatTurnRequest::Validate() const {
  if (messages.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has no messages");
  }
  if (messages.front().role == Role::kAssistant) {
    throw Error(ErrorCode::kInvalidArgument,
                "chat request must start with a system or user message");
  }
}

void LlmConfig::Validate() const {
  if (max_retries < 0) throw Error(ErrorCode::kConfig, "max_retries must be >= 0");
  if (requests_per_minute <= 0) {
    throw Error(ErrorCode::kConfig, "requests_per_minute must be > 0");
  }
  if (max_in_flight <= 0) throw Error(ErrorCode::kConfig, "max_in_flight must be > 0");
  if (timeout_ms <= 0) throw Error(ErrorCode::kConfig, "timeout_ms must be > 0");
  if (backend == Backend::kRemote && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "remote backend requires an endpoint");
  }
}

nlohmann::json LlmConfigToJson(const LlmConfig& c) {
  return {
      {"backend", c.backend == Backend::kRemote ? "remote" : "mock"},
      {"dialect", c.dialect == Dialect::kMessages ? "messages" : "content-blocks"},
      {"endpoint", c.endpoint},
      {"model", c.model},
      {"api_key_env", c.api_key_env},
      {"temperature", c.temperature},
      {"max_tokens", c.max_tokens},
      {"max_retries", c.max_retries},
      {"timeout_ms", c.timeout_ms},
      {"initial_backoff_ms", c.initial_backoff_ms},
      {"max_backoff_ms", c.max_backoff_ms},
      {"requests_per_minute", c.requests_per_minute},
      {"max_in_flight", c.max_in_flight},
      {"mock_script", c.mock_script},
  };
}

LlmConfig LlmConfigFromJson(const nlohmann::json& j, LlmConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "LLM config must be an object");
  try {
    if (j.contains("backend")) {
      std::string b = j.at("backend").get<std::string>();
      if (b == "remote") {
        c.backend = Backend::kRemote;
      } else if (b == "mock") {
        c.backend = Backend::kMock;
      } else {
        throw Error(ErrorCode::kConfig, "unknown backend '" + b + "'");
      }
    }
    if (j.contains("dialect")) {
      std::string d = j.at("dialect").get<std::string>();
      if (d == "messages") {
        c.dialect = Dialect::kMessages;
      } else if (d == "content-blocks") {
        c.dialect = Dialect::kContentBlocks;
      } else {
        throw Error(ErrorCode::kConfig, "unknown dialect '" + d + "'");
      }
    }
    if (j.contains("api_key")) {
      throw Error(ErrorCode::kConfig,
                  "literal credentials are not accepted; set api_key_env instead");
    }
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("endpoint", c.endpoint);
    get("model", c.model);
    get("api_key_env", c.api_key_env);
    get("temperature", c.temperature);
    get("max_tokens", c.max_tokens);
    get("max_retries", c.max_retries);
    get("timeout_ms", c.timeout_ms);
    get("initial_backoff_ms", c.initial_backoff_ms);
    get("max_backoff_ms", c.max_backoff_ms);
    get("requests_per_minute", c.requests_per_minute);
    get("max_in_flight", c.max_in_flight);
    get("mock_script", c.mock_script);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad LLM config: ") + e.what());
  }
  return c;
}

RateLimiter::RateLimiter(int per_minute)
    : RateLimiter(
          per_minute, [] { return std::chrono::steady_clock::now(); },
          [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); }) {}

RateLimiter::RateLimiter(int per_minute, Clock clock, Sleeper sleeper)
    : per_minute_(per_minute), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {
  if (per_minute_ <= 0) {
    throw Error(ErrorCode::kConfig, "requests_per_minute must be > 0");
  }
}

void RateLimiter::Acquire() {
  constexpr auto kWindow = std::chrono::minutes(1);
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    auto now = clock_();
    while (!recent_.empty() && now - recent_.front() >= kWindow) recent_.pop_front();
    if (static_cast<int>(recent_.size()) < per_minute_) {
      recent_.push_back(now);
      return;
    }
    auto wait = recent_.front() + kWindow - now;
    lock.unlock();
    sleeper_(wait);
    lock.lock();
  }
}

void InFlightGate::Enter() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void InFlightGate::Leave() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

void ResponderRegistry::Register(std::string name, Responder responder) {
  responders_.insert_or_assign(std::move(name), std::move(responder));
}

const Responder* ResponderRegistry::Find(const std::string& name) const {
  auto it = responders_.find(name);
  return it == responders_.end() ? nullptr : &it->second;
}

MockScript MockScript::FromJson(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("entries")) throw Error(ErrorCode::kConfig, "mock script needs 'entries'");
    list = &j.at("entries");
  }
  if (!list->is_array()) throw Error(ErrorCode::kConfig, "mock script entries must be an array");
  MockScript script;
  try {
    for (const auto& e : *list) {
      MockEntry entry;
      if (e.contains("match")) entry.contains = e.at("match").get<std::string>();
      if (e.contains("contains")) entry.contains = e.at("contains").get<std::string>();
      if (e.contains("ordinal")) entry.ordinal = e.at("ordinal").get<int>();
      if (e.contains("reply")) entry.reply = e.at("reply").get<std::string>();
      if (e.contains("responder")) entry.responder = e.at("responder").get<std::string>();
      if (e.contains("options")) entry.options = e.at("options");
      if (e.contains("repeat")) entry.repeat = e.at("repeat").get<bool>();
      if (!e.contains("reply") && entry.responder.empty()) {
        throw Error(ErrorCode::kConfig, "mock entry needs 'reply' or 'responder'");
      }
      script.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kConfig, std::string("bad mock script: ") + ex.what());
  }
  return script;
}

MockScript MockScript::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open mock script '" + path + "'");
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "mock script '" + path + "': " + e.what());
  }
}

MockClient::MockClient(MockScript script, std::string model,
                       std::shared_ptr<const ResponderRegistry> registry)
    : script_(std::move(script)),
      model_(std::move(model)),
      registry_(std::move(registry)),
      consumed_(script_.entries.size(), false) {}

ChatTurnResponse MockClient::Complete(const ChatTurnRequest& request) {
  request.Validate();
  std::string haystack;
  for (const auto& m : request.messages) {
    haystack += m.text;
    haystack += '\n';
  }

  const MockEntry* chosen = nullptr;
  {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(request);
    int ordinal = static_cast<int>(requests_.size());
    for (std::size_t i = 0; i < script_.entries.size(); ++i) {
      if (consumed_[i]) continue;
      const MockEntry& e = script_.entries[i];
      if (e.ordinal != 0 && e.ordinal != ordinal) continue;
      if (e.contains != "*" && haystack.find(e.contains) == std::string::npos) continue;
      if (!e.repeat) consumed_[i] = true;
      chosen = &e;
      break;
    }
    if (chosen == nullptr) {
      throw Error(ErrorCode::kMockExhausted,
                  "mock script exhausted at call " + std::to_string(ordinal));
    }
  }

  ChatTurnResponse response;
  response.model = model_;
  if (!chosen->responder.empty()) {
    const Responder* r = registry_ ? registry_->Find(chosen->responder) : nullptr;
    if (r == nullptr) {
      throw Error(ErrorCode::kConfig, "unknown mock responder '" + chosen->responder + "'");
    }
    response.text = (*r)(request, chosen->options);
  } else {
    response.text = chosen->reply;
  }
  response.usage.prompt_tokens = static_cast<int>(haystack.size() / 4);
  response.usage.completion_tokens = static_cast<int>(response.text.size() / 4);
  return response;
}

int MockClient::call_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(requests_.size());
}

std::vector<ChatTurnRequest> MockClient::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return requests_;
}

std::string Redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), "[REDACTED]");
    pos += 10;
  }
  return text;
}

}  // namespace rarescale
