#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "adaptq/provider.hpp"
#include "adaptq/session.hpp"
#include "adaptq/util.hpp"
#include "json.hpp"

namespace adaptq {

struct ServiceConfig {
  std::filesystem::path data_dir = default_data_dir();
  // sessions/<id>.jsonl, sessions/<id>.transcript.jsonl, experiments/<id>/
  std::filesystem::path state_dir = ".adaptq";
  // Served at "/" when set.
  std::filesystem::path static_dir;
  // Relative mock script paths in posted experiment configs resolve here.
  std::filesystem::path config_base = std::filesystem::current_path();
  // Question generator for live sessions.
  ProviderConfig teacher = ProviderConfig::teacher_defaults();
  SessionConfig session_defaults;
  // Defaults to the system clock.
  Clock clock;
};

// Status code plus JSON body, independent of the HTTP transport.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Maps a domain error to its HTTP status: 404 NotFound/FileNotFound, 409
// StaleQuestion/MasteredChapter, 502 provider and generation failures, 400
// for other validation problems, 500 otherwise.
int http_status_for(const std::exception& e);

// Sessions and experiments behind a JSON API. Every session in state_dir is
// replayed on construction. Requests on different sessions run
// concurrently; requests on one session are serialized.
//
//   POST /sessions                 {"curriculum", "config"?}  -> 201
//   GET  /sessions/{id}                                        -> session
//   GET  /sessions/{id}/next                                   -> question
//   POST /sessions/{id}/answers    {"question_id", "label"}    -> outcome
//   GET  /sessions/{id}/report                                 -> report
//   POST /experiments              ExperimentConfig            -> 202
//   GET  /experiments/{id}                                     -> status
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse create_session(const nlohmann::json& body);
  ApiResponse get_session(const std::string& id);
  ApiResponse next_question(const std::string& id);
  ApiResponse answer(const std::string& id, const nlohmann::json& body);
  ApiResponse report(const std::string& id);
  ApiResponse start_experiment(const nlohmann::json& body);
  ApiResponse experiment_status(const std::string& id);

  // Dispatches on method and path. Unknown routes give 404, a malformed
  // JSON body 400.
  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::string& body);

  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread; returns the
  // port, or -1.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  // Waits for every experiment worker to finish.
  void wait_experiments();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Question payload shown to a student: no answer, no explanation.
nlohmann::json question_payload(const Question& q, int difficulty);

}  // namespace adaptq
