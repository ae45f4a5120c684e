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

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "rarescale/error.h"
#include "rarescale/mock_responders.h"
#include "test_util.h"

namespace rarescale {
namespace {

using nlohmann::json;

ErrorCode CodeOf(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

TEST(PromptTemplate, Substitutes) {
  EXPECT_EQ(PromptTemplate("t", "Hello {name}").Render({{"name", "Ada"}}), "Hello Ada");
}

TEST(PromptTemplate, MissingVariable) {
  std::string message;
  EXPECT_EQ(CodeOf([&] { PromptTemplate("t", "Hi {x}").Render({}); }, &message),
            ErrorCode::kMissingVariable);
  EXPECT_NE(message.find("x"), std::string::npos);
}

TEST(PromptTemplate, UnknownPlaceholder) {
  // The body names a placeholder outside the declared variable set.
  PromptTemplate t("t", "Hi {x} {y}", {"x"});
  EXPECT_EQ(CodeOf([&] { t.Render({{"x", "1"}, {"y", "2"}}); }), ErrorCode::kUnknownPlaceholder);
}

TEST(PromptTemplate, CompleteSubstitutionAndEscapes) {
  PromptTemplate t("t", "{a}-{b}-{c} {{literal}}");
  EXPECT_EQ(t.required_vars(), (std::set<std::string>{"a", "b", "c"}));
  std::string out = t.Render({{"a", "1"}, {"b", "2"}, {"c", "3"}});
  EXPECT_EQ(out, "1-2-3 {literal}");
  EXPECT_FALSE(std::regex_search(PromptTemplate("t", "{a}{b}{c}").Render({{"a", "x"}, {"b", "y"}, {"c", "z"}}),
                                 std::regex(R"(\{[A-Za-z_]\w*\})")));
  // Substituted values are not re-scanned.
  EXPECT_EQ(PromptTemplate("t", "{a}").Render({{"a", "{b}"}}), "{b}");
}

TEST(PromptTemplate, UnbalancedBrace) {
  EXPECT_EQ(CodeOf([] { PromptTemplate::Placeholders("oops {a"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { PromptTemplate::Placeholders("oops a}"); }), ErrorCode::kParse);
}

TEST(TemplateSet, DefaultsCoverEveryPrompt) {
  TemplateSet set = TemplateSet::Defaults();
  for (const char* name : {"chat_single", "chat_turnwise", "checker", "ddx", "ddx_candidates",
                           "judge_binary", "judge_similarity", "profile_fill", "candidate_gen",
                           "negative_screen"}) {
    EXPECT_NO_THROW(set.Get(name)) << name;
  }
  EXPECT_EQ(CodeOf([&] { set.Get("nope"); }), ErrorCode::kNotFound);
}

TEST(TemplateSet, DirectoryOverrides) {
  testing::TempDir dir;
  testing::WriteFile(dir.file("judge_binary.txt"), "Same? {diagnosis} / {reference}");
  TemplateSet set = TemplateSet::FromDirectory(dir.path());
  EXPECT_EQ(set.Get("judge_binary").Render({{"diagnosis", "a"}, {"reference", "b"}}), "Same? a / b");
  EXPECT_EQ(set.Get("ddx").body(), TemplateSet::Defaults().Get("ddx").body());
}

TEST(ChatTurnRequest, Validate) {
  ChatTurnRequest empty;
  EXPECT_THROW(empty.Validate(), Error);
  ChatTurnRequest assistant_first{{{Role::kAssistant, "hi"}}};
  EXPECT_THROW(assistant_first.Validate(), Error);
  EXPECT_NO_THROW(ChatTurnRequest::FromPrompt("x").Validate());
}

TEST(MockClient, WildcardReply) {
  MockClient mock(MockScript::FromJson(json::parse(R"([{"match": "*", "reply": "ok"}])")));
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("anything")).text, "ok");
}

TEST(MockClient, ExhaustedAfterSingleReply) {
  MockClient mock(MockScript::FromJson(json::parse(R"([{"match": "*", "reply": "ok"}])")));
  mock.Complete(ChatTurnRequest::FromPrompt("a"));
  EXPECT_EQ(CodeOf([&] { mock.Complete(ChatTurnRequest::FromPrompt("b")); }),
            ErrorCode::kMockExhausted);
  EXPECT_EQ(mock.call_count(), 2);
}

TEST(MockClient, SubstringAndOrdinalMatchers) {
  MockClient mock(MockScript::FromJson(json::parse(R"({"entries": [
      {"contains": "apple", "reply": "fruit"},
      {"ordinal": 2, "reply": "second"},
      {"contains": "*", "reply": "other", "repeat": true}]})")));
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("pear")).text, "other");
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("pear")).text, "second");
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("apple pie")).text, "fruit");
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("apple pie")).text, "other");
  EXPECT_EQ(mock.requests()[2].messages[0].text, "apple pie");
}

TEST(MockClient, DeterministicSequences) {
  auto script = MockScript::FromJson(json::parse(R"([
      {"contains": "a", "reply": "1"}, {"contains": "a", "reply": "2"},
      {"contains": "*", "reply": "3", "repeat": true}])"));
  std::vector<std::string> prompts = {"a", "b", "a", "a", "c"};
  auto run = [&] {
    MockClient mock(script);
    std::vector<std::string> out;
    for (const auto& p : prompts) out.push_back(mock.Complete(ChatTurnRequest::FromPrompt(p)).text);
    return out;
  };
  EXPECT_EQ(run(), run());
  EXPECT_EQ(run(), (std::vector<std::string>{"1", "3", "2", "3", "3"}));
}

TEST(MockClient, ResponderEntries) {
  auto registry = std::make_shared<ResponderRegistry>();
  registry->Register("echo", [](const ChatTurnRequest& r, const json& options) {
    return options.value("prefix", std::string()) + r.messages.back().text;
  });
  MockClient mock(MockScript::FromJson(json::parse(
                      R"([{"responder": "echo", "options": {"prefix": ">"}, "repeat": true}])")),
                  "mock", registry);
  EXPECT_EQ(mock.Complete(ChatTurnRequest::FromPrompt("hi")).text, ">hi");
  MockClient unknown(MockScript::FromJson(json::parse(R"([{"responder": "nope"}])")), "mock",
                     registry);
  EXPECT_EQ(CodeOf([&] { unknown.Complete(ChatTurnRequest::FromPrompt("x")); }), ErrorCode::kConfig);
}

TEST(MockScript, RejectsBadEntries) {
  EXPECT_EQ(CodeOf([] { MockScript::FromJson(json::parse(R"([{"match": "*"}])")); }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { MockScript::FromJson(json::parse(R"({"x": 1})")); }), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { MockScript::Load("/nonexistent.json"); }), ErrorCode::kIo);
}

TEST(MakeClient, DefaultMockRoutesByTask) {
  LlmConfig config;
  auto client = MakeClient(config);
  EXPECT_TRUE(client->is_mock());
  std::string reply = client->Complete(ChatTurnRequest::FromPrompt(
      TemplateSet::Defaults().Get("judge_binary").Render(
          {{"diagnosis", "Fabry disease"}, {"reference", "fabry  DISEASE"}})))
                          .text;
  EXPECT_EQ(reply, "yes");
}

// --- rate limiter ----------------------------------------------------------

TEST(RateLimiter, NeverExceedsCapInAnyWindow) {
  using Clock = std::chrono::steady_clock;
  Clock::time_point now{};
  std::vector<Clock::time_point> grants;
  RateLimiter limiter(
      7, [&] { return now; }, [&](Clock::duration d) { now += d; });
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    now += std::chrono::milliseconds(gen() % 4000);
    limiter.Acquire();
    grants.push_back(now);
  }
  // Audit: any 60 s window holds at most 7 grants.
  for (std::size_t i = 0; i < grants.size(); ++i) {
    int in_window = 0;
    for (std::size_t j = i; j < grants.size() && grants[j] - grants[i] < std::chrono::minutes(1); ++j) {
      ++in_window;
    }
    EXPECT_LE(in_window, 7) << "window starting at grant " << i;
  }
}

TEST(RateLimiter, BurstWaitsForWindow) {
  using Clock = std::chrono::steady_clock;
  Clock::time_point now{};
  Clock::duration slept{};
  RateLimiter limiter(
      2, [&] { return now; }, [&](Clock::duration d) { slept += d; now += d; });
  limiter.Acquire();
  limiter.Acquire();
  EXPECT_EQ(slept, Clock::duration::zero());
  limiter.Acquire();
  EXPECT_EQ(slept, std::chrono::minutes(1));
}

// --- remote client against a local stub ------------------------------------

class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_headers = req.headers;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

  std::atomic<int> hits{0};
  std::string last_body;
  httplib::Headers last_headers;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

const char kMessagesOk[] =
    R"({"model": "stub-1", "choices": [{"message": {"role": "assistant", "content": "hello"}}],
        "usage": {"prompt_tokens": 5, "completion_tokens": 1}})";

LlmConfig RemoteConfig(const std::string& endpoint) {
  LlmConfig c;
  c.backend = Backend::kRemote;
  c.endpoint = endpoint;
  c.model = "stub";
  c.initial_backoff_ms = 1;
  c.max_backoff_ms = 5;
  c.requests_per_minute = 1000;
  return c;
}

TEST(RemoteClient, RetriesTwoRateLimitsThenSucceeds) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    static std::atomic<int> calls{0};
    if (calls++ < 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
    } else {
      res.set_content(kMessagesOk, "application/json");
    }
  });
  RemoteClient client(RemoteConfig(stub.endpoint()));
  ChatTurnResponse r = client.Complete(ChatTurnRequest::FromPrompt("hi"));
  EXPECT_EQ(r.text, "hello");
  EXPECT_EQ(r.retry_count, 2);
  EXPECT_EQ(r.usage.prompt_tokens, 5);
  EXPECT_EQ(r.model, "stub-1");
  EXPECT_EQ(stub.hits, 3);
}

TEST(RemoteClient, GivesUpAfterMaxRetries) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  LlmConfig c = RemoteConfig(stub.endpoint());
  c.max_retries = 2;
  RemoteClient client(c);
  EXPECT_EQ(CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }),
            ErrorCode::kTransport);
  EXPECT_EQ(stub.hits, 3);
}

TEST(RemoteClient, PersistentRateLimitIsReported) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  LlmConfig c = RemoteConfig(stub.endpoint());
  c.max_retries = 1;
  RemoteClient client(c);
  EXPECT_EQ(CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }),
            ErrorCode::kRateLimited);
}

TEST(RemoteClient, ClientErrorsAreNotRetried) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  RemoteClient client(RemoteConfig(stub.endpoint()));
  EXPECT_EQ(CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }),
            ErrorCode::kTransport);
  EXPECT_EQ(stub.hits, 1);
}

TEST(RemoteClient, MalformedResponse) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  RemoteClient client(RemoteConfig(stub.endpoint()));
  EXPECT_EQ(CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }),
            ErrorCode::kMalformedResponse);
}

TEST(RemoteClient, ConnectionFailureIsTransport) {
  LlmConfig c = RemoteConfig("http://127.0.0.1:1/v1/chat");
  c.max_retries = 1;
  c.timeout_ms = 500;
  RemoteClient client(c);
  EXPECT_EQ(CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }),
            ErrorCode::kTransport);
}

TEST(RemoteClient, MessagesDialectWireFormat) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content(kMessagesOk, "application/json");
  });
  ::setenv("RARESCALE_TEST_KEY", "sk-test-123456", 1);
  LlmConfig c = RemoteConfig(stub.endpoint());
  c.api_key_env = "RARESCALE_TEST_KEY";
  RemoteClient client(c);
  client.Complete({{{Role::kSystem, "be brief"}, {Role::kUser, "hi"}}});
  json body = json::parse(stub.last_body);
  EXPECT_EQ(body["model"], "stub");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "hi");
  EXPECT_EQ(stub.last_headers.find("Authorization")->second, "Bearer sk-test-123456");
}

TEST(RemoteClient, ContentBlocksDialectWireFormat) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content(
        R"({"content": [{"type": "text", "text": "hel"}, {"type": "text", "text": "lo"}],
            "usage": {"input_tokens": 3, "output_tokens": 2}})",
        "application/json");
  });
  ::setenv("RARESCALE_TEST_KEY", "sk-test-123456", 1);
  LlmConfig c = RemoteConfig(stub.endpoint());
  c.dialect = Dialect::kContentBlocks;
  c.api_key_env = "RARESCALE_TEST_KEY";
  RemoteClient client(c);
  ChatTurnResponse r = client.Complete({{{Role::kSystem, "be brief"}, {Role::kUser, "hi"}}});
  EXPECT_EQ(r.text, "hello");
  EXPECT_EQ(r.usage.completion_tokens, 2);
  json body = json::parse(stub.last_body);
  EXPECT_EQ(body["system"], "be brief");
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["content"][0]["text"], "hi");
  EXPECT_EQ(stub.last_headers.find("x-api-key")->second, "sk-test-123456");
  EXPECT_TRUE(stub.last_headers.count("anthropic-version"));
}

TEST(Credentials, NeverLeakIntoErrorsOrConfigs) {
  const std::string secret = "sk-secret-ABCDEF987654";
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    res.status = 401;
    res.set_content("bad key: " + req.get_header_value("Authorization"), "text/plain");
  });
  ::setenv("RARESCALE_SECRET_KEY", secret.c_str(), 1);
  LlmConfig c = RemoteConfig(stub.endpoint());
  c.api_key_env = "RARESCALE_SECRET_KEY";
  RemoteClient client(c);
  std::string message;
  CodeOf([&] { client.Complete(ChatTurnRequest::FromPrompt("hi")); }, &message);
  EXPECT_NE(message.find("401"), std::string::npos);
  EXPECT_EQ(message.find(secret), std::string::npos) << message;

  std::string serialized = LlmConfigToJson(c).dump();
  EXPECT_EQ(serialized.find(secret), std::string::npos);
  EXPECT_NE(serialized.find("RARESCALE_SECRET_KEY"), std::string::npos);
  EXPECT_EQ(LlmConfigFromJson(LlmConfigToJson(c)).api_key_env, "RARESCALE_SECRET_KEY");
  EXPECT_EQ(CodeOf([] { LlmConfigFromJson(json{{"api_key", "sk-literal"}}); }), ErrorCode::kConfig);
  EXPECT_EQ(Redact("a sk b sk", "sk"), "a [REDACTED] b [REDACTED]");
}

TEST(LlmConfig, Validate) {
  LlmConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.max_retries = -1;
  EXPECT_EQ(CodeOf([&] { c.Validate(); }), ErrorCode::kConfig);
  c = {};
  c.requests_per_minute = 0;
  EXPECT_EQ(CodeOf([&] { c.Validate(); }), ErrorCode::kConfig);
  c = {};
  c.backend = Backend::kRemote;
  EXPECT_EQ(CodeOf([&] { c.Validate(); }), ErrorCode::kConfig);  // no endpoint
  ::unsetenv("RARESCALE_UNSET_KEY");
  LlmConfig r = RemoteConfig("http://127.0.0.1:9/x");
  r.api_key_env = "RARESCALE_UNSET_KEY";
  EXPECT_EQ(CodeOf([&] { RemoteClient client(r); }), ErrorCode::kConfig);
}

}  // namespace
}  // namespace rarescale
