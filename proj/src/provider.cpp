#include "adaptq/provider.hpp"

#include "adaptq/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"

namespace adaptq {

using nlohmann::json;

ProviderConfig ProviderConfig::teacher_defaults() {
  ProviderConfig cfg;
  cfg.temperature = 0.7;
  return cfg;
}

ProviderConfig ProviderConfig::student_defaults() {
  ProviderConfig cfg;
  cfg.temperature = 0.0;
  return cfg;
}

void ProviderConfig::validate() const {
  if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (backend == Backend::Remote) {
    if (endpoint.empty()) throw ValidationError("remote backend requires an endpoint");
    if (model.empty()) throw ValidationError("remote backend requires a model");
  } else if (script_path.empty()) {
    throw ValidationError("mock backend requires a script path");
  }
}

ProviderConfig ProviderConfig::from_json(const json& doc, const std::filesystem::path& base_dir,
                                         ProviderConfig defaults) {
  ProviderConfig cfg = std::move(defaults);
  try {
    std::string backend = doc.value("backend", std::string("mock"));
    if (backend == "mock") {
      cfg.backend = Backend::Mock;
    } else if (backend == "remote") {
      cfg.backend = Backend::Remote;
    } else {
      throw ValidationError("unknown backend '" + backend + "'");
    }
    cfg.endpoint = doc.value("endpoint", cfg.endpoint);
    cfg.model = doc.value("model", cfg.model);
    cfg.temperature = doc.value("temperature", cfg.temperature);
    cfg.max_retries = doc.value("max_retries", cfg.max_retries);
    cfg.timeout = std::chrono::milliseconds(doc.value("timeout_ms", cfg.timeout.count()));
    cfg.backoff_base =
        std::chrono::milliseconds(doc.value("backoff_ms", cfg.backoff_base.count()));
    cfg.api_key_env = doc.value("api_key_env", cfg.api_key_env);
    if (doc.contains("script")) {
      std::filesystem::path script = doc["script"].get<std::string>();
      cfg.script_path = script.is_relative() && !base_dir.empty() ? base_dir / script : script;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad provider config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json ProviderConfig::to_json() const {
  json doc = {{"backend", backend == Backend::Mock ? "mock" : "remote"},
              {"model", model},
              {"temperature", temperature},
              {"max_retries", max_retries},
              {"timeout_ms", timeout.count()},
              {"backoff_ms", backoff_base.count()},
              {"api_key_env", api_key_env}};
  if (!endpoint.empty()) doc["endpoint"] = endpoint;
  if (!script_path.empty()) doc["script"] = script_path.string();
  return doc;
}

MockScript MockScript::from_json(const json& doc) {
  if (!doc.is_array()) throw ValidationError("mock script must be a JSON array");
  MockScript script;
  for (const auto& item : doc) {
    MockRule rule;
    try {
      const auto& match = item.at("match");
      if (match.is_number_integer() && match.get<std::int64_t>() >= 0) {
        rule.match = match.get<std::size_t>();
      } else {
        rule.match = match.get<std::string>();
      }
      rule.reply = item.at("reply").get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad mock rule: ") + e.what());
    }
    script.rules.push_back(std::move(rule));
  }
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

json MockScript::to_json() const {
  json out = json::array();
  for (const auto& rule : rules) {
    json match = std::holds_alternative<std::string>(rule.match)
                     ? json(std::get<std::string>(rule.match))
                     : json(std::get<std::size_t>(rule.match));
    out.push_back({{"match", match}, {"reply", rule.reply}});
  }
  return out;
}

json TranscriptRecord::to_json() const {
  return {{"seq", seq},         {"ts", ts},
          {"backend", backend}, {"model", model},
          {"messages", messages_to_json(messages)}, {"reply", reply}};
}

TranscriptLog::TranscriptLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw IoError("cannot open transcript " + path_.string());
}

TranscriptRecord TranscriptLog::append(TranscriptRecord record) {
  std::lock_guard lock(mutex_);
  record.seq = records_.size();
  if (out_.is_open()) {
    out_ << record.to_json().dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("transcript write failed for " + path_.string());
  }
  records_.push_back(record);
  return record;
}

std::vector<TranscriptRecord> TranscriptLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t TranscriptLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

ChatClient::ChatClient(ProviderConfig config, std::shared_ptr<TranscriptLog> log, Clock clock)
    : config_(std::move(config)),
      log_(log ? std::move(log) : std::make_shared<TranscriptLog>()),
      clock_(clock ? std::move(clock) : system_clock()) {}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) throw ValidationError("cannot complete an empty message list");
  for (const auto& m : messages) {
    if (m.content.empty()) throw ValidationError("chat message content is empty");
  }
  std::unique_lock<std::mutex> sequence;
  if (sequenced()) sequence = std::unique_lock(call_mutex_);
  std::string reply = send(messages);
  TranscriptRecord record;
  record.ts = clock_();
  record.backend = config_.backend == Backend::Mock ? "mock" : "remote";
  record.model = config_.model;
  record.messages = messages;
  record.reply = reply;
  log_->append(std::move(record));
  return reply;
}

MockClient::MockClient(ProviderConfig config, MockScript script,
                       std::shared_ptr<TranscriptLog> log, Clock clock)
    : ChatClient(std::move(config), std::move(log), std::move(clock)),
      script_(std::move(script)),
      consumed_(script_.rules.size(), false) {}

std::size_t MockClient::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t MockClient::remaining() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count(consumed_.begin(), consumed_.end(), false));
}

std::string MockClient::send(const std::vector<ChatMessage>& messages) {
  std::lock_guard lock(mutex_);
  std::size_t index = requests_++;
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    if (consumed_[i]) continue;
    const auto& rule = script_.rules[i];
    bool matches = false;
    if (const auto* position = std::get_if<std::size_t>(&rule.match)) {
      matches = *position == index;
    } else {
      const auto& needle = std::get<std::string>(rule.match);
      matches = needle == "*" ||
                std::any_of(messages.begin(), messages.end(), [&](const ChatMessage& m) {
                  return m.content.find(needle) != std::string::npos;
                });
    }
    if (matches) {
      consumed_[i] = true;
      return rule.reply;
    }
  }
  throw ScriptExhausted(index);
}

json chat_request_body(const ProviderConfig& config, const std::vector<ChatMessage>& messages) {
  return {{"model", config.model},
          {"messages", messages_to_json(messages)},
          {"temperature", config.temperature}};
}

std::string chat_reply_content(const json& response) {
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

RemoteClient::RemoteClient(ProviderConfig config, std::shared_ptr<TranscriptLog> log, Clock clock)
    : ChatClient(std::move(config), std::move(log), std::move(clock)) {}

std::size_t RemoteClient::last_attempts() const {
  std::lock_guard lock(mutex_);
  return last_attempts_;
}

std::string RemoteClient::send(const std::vector<ChatMessage>& messages) {
  const auto& cfg = config();
  Endpoint ep = split_endpoint(cfg.endpoint);
  httplib::Client http(ep.origin);
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - seconds);
  http.set_connection_timeout(seconds.count(), micros.count());
  http.set_read_timeout(seconds.count(), micros.count());
  http.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = chat_request_body(cfg, messages).dump();
  const std::string path = ep.base_path + "/chat/completions";

  std::string last_error;
  const int max_attempts = cfg.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    {
      std::lock_guard lock(mutex_);
      last_attempts_ = static_cast<std::size_t>(attempt);
    }
    auto res = http.Post(path, headers, body, "application/json");
    if (res && res->status == 200) {
      try {
        return chat_reply_content(json::parse(res->body));
      } catch (const json::parse_error& e) {
        throw TransportError(std::string("response is not JSON: ") + e.what());
      }
    }
    if (res && (res->status == 401 || res->status == 403)) {
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res && !transient_status(res->status)) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + cfg.endpoint);
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    spdlog::warn("chat completion attempt {}/{} to {} failed: {}", attempt, max_attempts,
                 cfg.endpoint, last_error);
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(cfg.backoff_base * (1LL << (attempt - 1)));
    }
  }
  throw TransportError("giving up after " + std::to_string(max_attempts) +
                       " attempts: " + last_error);
}

std::unique_ptr<ChatClient> make_client(const ProviderConfig& config,
                                        std::shared_ptr<TranscriptLog> log, Clock clock) {
  config.validate();
  if (config.backend == Backend::Mock) {
    return std::make_unique<MockClient>(config, MockScript::load(config.script_path),
                                        std::move(log), std::move(clock));
  }
  return std::make_unique<RemoteClient>(config, std::move(log), std::move(clock));
}

}  // namespace adaptq
