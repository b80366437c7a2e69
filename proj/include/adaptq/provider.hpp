#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adaptq/prompting.hpp"
#include "adaptq/util.hpp"
#include "json.hpp"

namespace adaptq {

enum class Backend { Remote, Mock };

struct ProviderConfig {
  Backend backend = Backend::Mock;
  std::string endpoint;  // e.g. https://api.openai.com/v1
  std::string model = "mock";
  double temperature = 0.7;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff_base{500};
  std::filesystem::path script_path;
  // Name of the environment variable holding the API key. The key itself is
  // never stored or logged.
  std::string api_key_env = "OPENAI_API_KEY";

  // Generation needs diversity, answering needs determinism.
  static ProviderConfig teacher_defaults();
  static ProviderConfig student_defaults();

  void validate() const;

  // Relative script paths resolve against `base_dir`.
  static ProviderConfig from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {},
                                  ProviderConfig defaults = teacher_defaults());
  nlohmann::json to_json() const;
};

// One rule of a mock script. A rule matches a request when it is the
// wildcard "*", when its text occurs in any message content, or when its
// index equals the zero-based request number.
struct MockRule {
  std::variant<std::string, std::size_t> match;
  std::string reply;
};

struct MockScript {
  std::vector<MockRule> rules;

  static MockScript load(const std::filesystem::path& path);
  static MockScript from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct TranscriptRecord {
  std::size_t seq = 0;
  std::string ts;
  std::string backend;
  std::string model;
  std::vector<ChatMessage> messages;
  std::string reply;

  nlohmann::json to_json() const;
};

// Append-only JSON-lines log shared by every client of a run. An empty path
// keeps records in memory only.
class TranscriptLog {
 public:
  TranscriptLog() = default;
  explicit TranscriptLog(std::filesystem::path path);

  // Assigns the sequence number, writes and flushes the line.
  TranscriptRecord append(TranscriptRecord record);

  std::vector<TranscriptRecord> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  mutable std::mutex mutex_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<TranscriptRecord> records_;
};

// Chat-completion handle. Safe to share across threads; transcript appends
// are serialized and mock playback is globally ordered per handle.
class ChatClient {
 public:
  ChatClient(ProviderConfig config, std::shared_ptr<TranscriptLog> log, Clock clock);
  virtual ~ChatClient() = default;
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  // Throws ValidationError on empty input, TransportError, AuthError or
  // ScriptExhausted. The exchange is in the transcript before this returns.
  std::string complete(const std::vector<ChatMessage>& messages);

  const ProviderConfig& config() const noexcept { return config_; }
  const std::shared_ptr<TranscriptLog>& transcript() const noexcept { return log_; }

 protected:
  virtual std::string send(const std::vector<ChatMessage>& messages) = 0;
  // When true, send and transcript append run under one lock so the
  // transcript order equals the playback order.
  virtual bool sequenced() const { return false; }

 private:
  std::mutex call_mutex_;
  ProviderConfig config_;
  std::shared_ptr<TranscriptLog> log_;
  Clock clock_;
};

class MockClient final : public ChatClient {
 public:
  MockClient(ProviderConfig config, MockScript script, std::shared_ptr<TranscriptLog> log,
             Clock clock);

  std::size_t requests() const;
  std::size_t remaining() const;

  // Consumes the rule `messages` would match without logging it. Used to
  // fast-forward a script past exchanges already recorded before a restart.
  void advance(const std::vector<ChatMessage>& messages) { send(messages); }

 protected:
  std::string send(const std::vector<ChatMessage>& messages) override;
  bool sequenced() const override { return true; }

 private:
  mutable std::mutex mutex_;
  MockScript script_;
  std::vector<bool> consumed_;
  std::size_t requests_ = 0;
};

// OpenAI-compatible POST {endpoint}/chat/completions with retry and
// exponential backoff on connection failures, 408, 429 and 5xx.
class RemoteClient final : public ChatClient {
 public:
  RemoteClient(ProviderConfig config, std::shared_ptr<TranscriptLog> log, Clock clock);

  // HTTP attempts made by the most recent call.
  std::size_t last_attempts() const;

 protected:
  std::string send(const std::vector<ChatMessage>& messages) override;

 private:
  mutable std::mutex mutex_;
  std::size_t last_attempts_ = 0;
};

std::unique_ptr<ChatClient> make_client(const ProviderConfig& config,
                                        std::shared_ptr<TranscriptLog> log, Clock clock);

// Request body sent to the remote backend.
nlohmann::json chat_request_body(const ProviderConfig& config,
                                 const std::vector<ChatMessage>& messages);
// Extracts choices[0].message.content; throws TransportError when absent.
std::string chat_reply_content(const nlohmann::json& response);

}  // namespace adaptq
