#include "doctest.h"

#include "adaptq/errors.hpp"
#include "adaptq/provider.hpp"
#include "httplib.h"
#include "support.hpp"

#include <atomic>
#include <thread>

using namespace adaptq;
using nlohmann::json;
using testing::TempDir;

namespace {

MockScript script(std::initializer_list<std::pair<json, std::string>> rules) {
  json doc = json::array();
  for (const auto& [match, reply] : rules) doc.push_back({{"match", match}, {"reply", reply}});
  return MockScript::from_json(doc);
}

ProviderConfig mock_config() {
  ProviderConfig cfg;
  cfg.script_path = "inline";
  return cfg;
}

std::vector<ChatMessage> ask(const std::string& text) { return {{Role::User, text}}; }

// Local chat-completion endpoint failing with 500 a given number of times.
class StubServer {
 public:
  explicit StubServer(int failures, int fail_status = 500) : failures_(failures) {
    server_.Post("/v1/chat/completions", [this, fail_status](const httplib::Request& req,
                                                            httplib::Response& res) {
      int n = ++hits_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (n <= failures_) {
        res.status = fail_status;
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "b"}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_; }
  std::string last_body() const { return last_body_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
};

ProviderConfig remote_config(const std::string& endpoint) {
  ProviderConfig cfg;
  cfg.backend = Backend::Remote;
  cfg.endpoint = endpoint;
  cfg.model = "stub-model";
  cfg.max_retries = 3;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(2000);
  cfg.api_key_env = "ADAPTQ_TEST_KEY";
  return cfg;
}

}  // namespace

TEST_CASE("mock wildcard playback") {
  MockClient client(mock_config(), script({{"*", "a"}, {"*", "a"}}), nullptr, logical_clock());
  CHECK(client.complete(ask("anything")) == "a");
  CHECK(client.complete(ask("else")) == "a");
}

TEST_CASE("mock exhaustion") {
  MockClient client(mock_config(), script({{"*", "only"}}), nullptr, logical_clock());
  CHECK(client.complete(ask("one")) == "only");
  CHECK_THROWS_AS(client.complete(ask("two")), ScriptExhausted);
}

TEST_CASE("mock substring and index rules") {
  MockClient client(mock_config(),
                    script({{"generate", "G1"}, {json(2), "third"}, {"answer", "A1"}, {"*", "rest"}}),
                    nullptr, logical_clock());
  CHECK(client.complete(ask("please answer")) == "A1");
  CHECK(client.complete(ask("please generate")) == "G1");
  CHECK(client.complete(ask("generate again")) == "third");
  CHECK(client.complete(ask("x")) == "rest");
  CHECK(client.remaining() == 0);
  CHECK(client.requests() == 4);
}

TEST_CASE("transcript is complete, ordered and replay-identical") {
  TempDir dir;
  auto run = [&](const std::string& name) {
    auto log = std::make_shared<TranscriptLog>(dir / name);
    MockClient client(mock_config(), script({{"*", "r1"}, {"*", "r2"}, {"*", "r3"}}), log,
                      logical_clock());
    for (int i = 0; i < 3; ++i) {
      std::string reply = client.complete(ask("q" + std::to_string(i)));
      REQUIRE(log->size() == static_cast<std::size_t>(i + 1));
      CHECK(log->records().back().reply == reply);
    }
    return read_file(dir / name);
  };
  std::string first = run("a.jsonl");
  CHECK(first == run("b.jsonl"));
  auto lines = split_lines(first);
  REQUIRE(lines.size() >= 3);
  auto rec = json::parse(lines[1]);
  CHECK(rec["seq"] == 1);
  CHECK(rec["backend"] == "mock");
  CHECK(rec["messages"][0]["content"] == "q1");
  CHECK(rec["reply"] == "r2");
  CHECK(rec.contains("ts"));
}

TEST_CASE("empty requests are rejected") {
  MockClient client(mock_config(), script({{"*", "a"}}), nullptr, logical_clock());
  CHECK_THROWS_AS(client.complete({}), ValidationError);
  CHECK_THROWS_AS(client.complete(ask("")), ValidationError);
}

TEST_CASE("remote client retries transient failures") {
  StubServer stub(2);
  setenv("ADAPTQ_TEST_KEY", "sk-test", 1);
  RemoteClient client(remote_config(stub.endpoint()), nullptr, logical_clock());
  CHECK(client.complete(ask("hello")) == "b");
  CHECK(stub.hits() == 3);
  CHECK(client.last_attempts() == 3);
  CHECK(stub.last_auth() == "Bearer sk-test");
  auto body = json::parse(stub.last_body());
  CHECK(body["model"] == "stub-model");
  CHECK(body["messages"][0] == json{{"role", "user"}, {"content", "hello"}});
  CHECK(body.contains("temperature"));
  CHECK(client.transcript()->size() == 1);
  unsetenv("ADAPTQ_TEST_KEY");
}

TEST_CASE("remote client gives up after max retries") {
  StubServer stub(10);
  RemoteClient client(remote_config(stub.endpoint()), nullptr, logical_clock());
  CHECK_THROWS_AS(client.complete(ask("hello")), TransportError);
  CHECK(stub.hits() == 4);
  CHECK(client.transcript()->size() == 0);
}

TEST_CASE("remote client does not retry auth failures") {
  StubServer stub(10, 401);
  RemoteClient client(remote_config(stub.endpoint()), nullptr, logical_clock());
  CHECK_THROWS_AS(client.complete(ask("hello")), AuthError);
  CHECK(stub.hits() == 1);
}

TEST_CASE("unreachable endpoint is a transport error") {
  ProviderConfig cfg = remote_config("http://127.0.0.1:1/v1");
  cfg.max_retries = 1;
  RemoteClient client(cfg, nullptr, logical_clock());
  CHECK_THROWS_AS(client.complete(ask("hello")), TransportError);
  CHECK(client.last_attempts() == 2);
}

TEST_CASE("provider config") {
  ProviderConfig remote;
  remote.backend = Backend::Remote;
  CHECK_THROWS_AS(remote.validate(), ValidationError);
  ProviderConfig mock;
  CHECK_THROWS_AS(mock.validate(), ValidationError);
  CHECK(ProviderConfig::teacher_defaults().temperature == doctest::Approx(0.7));
  CHECK(ProviderConfig::student_defaults().temperature == doctest::Approx(0.0));

  auto cfg = ProviderConfig::from_json({{"backend", "mock"}, {"script", "s.json"}}, "/base");
  CHECK(cfg.script_path == std::filesystem::path("/base/s.json"));
  CHECK_THROWS_AS(ProviderConfig::from_json({{"backend", "carrier-pigeon"}}), ValidationError);
  CHECK(chat_reply_content(json::parse(R"({"choices":[{"message":{"content":"hi"}}]})")) == "hi");
  CHECK_THROWS_AS(chat_reply_content(json::object()), TransportError);
}
