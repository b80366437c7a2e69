#include "doctest.h"

#include "adaptq/errors.hpp"
#include "adaptq/student.hpp"
#include "support.hpp"

#include <atomic>
#include <chrono>
#include <thread>

using namespace adaptq;
using nlohmann::json;

namespace {

std::unique_ptr<MockClient> replying(std::initializer_list<std::string> replies) {
  json doc = json::array();
  for (const auto& r : replies) doc.push_back({{"match", "*"}, {"reply", r}});
  ProviderConfig cfg = ProviderConfig::student_defaults();
  cfg.script_path = "inline";
  return std::make_unique<MockClient>(cfg, MockScript::from_json(doc), nullptr, logical_clock());
}

// Answers "a" for stems containing "[even]" and "b" otherwise, after a short
// sleep, and records the peak number of overlapping calls.
class SlowClient final : public ChatClient {
 public:
  SlowClient() : ChatClient(ProviderConfig::student_defaults(), nullptr, logical_clock()) {}

  int peak() const { return peak_; }

 protected:
  std::string send(const std::vector<ChatMessage>& messages) override {
    int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(3));
    --active_;
    if (messages.back().content.find("[fail]") != std::string::npos) {
      throw TransportError("stub failure");
    }
    return messages.back().content.find("[even]") != std::string::npos ? "a" : "b";
  }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

PromptBuilder builder() { return {testing::grade9_math(), testing::templates()}; }

std::vector<StudentJob> jobs(int n) {
  std::vector<StudentJob> out;
  for (int i = 0; i < n; ++i) {
    std::string tag = i % 2 == 0 ? "[even]" : "[odd]";
    out.push_back({testing::make_question(testing::powers(), "Job " + std::to_string(i) + " " + tag),
                   TeachingMode::zero_shot()});
  }
  return out;
}

}  // namespace

TEST_CASE("grading a single reply") {
  auto prompts = builder();
  Question q = testing::figure1_question();
  SUBCASE("correct letter") {
    auto client = replying({"a"});
    auto run = answer_question(*client, prompts, q, TeachingMode::zero_shot());
    CHECK(run.correct);
    CHECK(run.label == Label::A);
    CHECK(run.raw_reply == "a");
  }
  SUBCASE("wrong answer keeps the chosen label") {
    Question b = q;
    b.answer = Label::B;
    auto client = replying({"The answer is c"});
    auto run = answer_question(*client, prompts, b, TeachingMode::zero_shot());
    CHECK_FALSE(run.correct);
    CHECK(run.label == Label::C);
  }
  SUBCASE("unreadable reply is wrong and flagged") {
    auto client = replying({"I'm not sure"});
    auto run = answer_question(*client, prompts, q, TeachingMode::zero_shot());
    CHECK_FALSE(run.correct);
    CHECK(run.parse_failed());
    CHECK_FALSE(run.parse_error.empty());
  }
  SUBCASE("each call is a fresh single-turn prompt") {
    auto client = replying({"a", "a"});
    answer_question(*client, prompts, q, TeachingMode::zero_shot());
    answer_question(*client, prompts, q, TeachingMode::zero_shot());
    auto records = client->transcript()->records();
    REQUIRE(records.size() == 2);
    CHECK(records[0].messages == records[1].messages);
  }
}

TEST_CASE("answer_all keeps job order under concurrency") {
  auto prompts = builder();
  SlowClient client;
  auto work = jobs(24);
  std::atomic<int> done{0};
  auto runs = answer_all(client, prompts, work, 4, [&] { ++done; });
  REQUIRE(runs.size() == work.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].question_id == work[i].question.id);
    CHECK(runs[i].correct == (i % 2 == 0));
  }
  CHECK(done == 24);
  CHECK(client.peak() <= 4);
  CHECK(client.peak() >= 2);
  CHECK(client.transcript()->size() == 24);
}

TEST_CASE("answer_all serial and concurrent agree") {
  auto prompts = builder();
  SlowClient serial;
  SlowClient parallel;
  auto work = jobs(10);
  auto a = answer_all(serial, prompts, work, 1);
  auto b = answer_all(parallel, prompts, work, 5);
  CHECK(serial.peak() == 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].correct == b[i].correct);
  }
}

TEST_CASE("answer_all rethrows provider failures") {
  auto prompts = builder();
  SlowClient client;
  auto work = jobs(6);
  work[3].question.stem += " [fail]";
  CHECK_THROWS_AS(answer_all(client, prompts, work, 3), TransportError);
  CHECK(answer_all(client, prompts, {}, 3).empty());
}
