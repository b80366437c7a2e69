#include "adaptq/service.hpp"

#include "adaptq/adaptive_session.hpp"
#include "adaptq/errors.hpp"
#include "adaptq/experiment.hpp"
#include "httplib.h"

#include <spdlog/spdlog.h>

#include <atomic>
#include <map>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <thread>

namespace adaptq {

using nlohmann::json;
namespace fs = std::filesystem;

int http_status_for(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e) || dynamic_cast<const FileNotFound*>(&e)) return 404;
  if (dynamic_cast<const StaleQuestion*>(&e) || dynamic_cast<const MasteredChapter*>(&e)) {
    return 409;
  }
  if (dynamic_cast<const GenerationFailed*>(&e) || dynamic_cast<const TransportError*>(&e) ||
      dynamic_cast<const AuthError*>(&e) || dynamic_cast<const ScriptExhausted*>(&e)) {
    return 502;
  }
  if (dynamic_cast<const IoError*>(&e)) return 500;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const json::exception*>(&e)) return 400;
  return 500;
}

json question_payload(const Question& q, int difficulty) {
  json options = json::array();
  for (Label l : kLabels) {
    options.push_back({{"label", std::string(1, to_char(l))},
                       {"text", q.options[static_cast<std::size_t>(index_of(l))]}});
  }
  return {{"id", q.id},
          {"chapter", chapter_to_json(q.chapter)},
          {"stem", q.stem},
          {"options", options},
          {"difficulty", difficulty}};
}

namespace {

struct SessionEntry {
  std::mutex mutex;
  std::optional<AdaptiveSession> session;
};

struct ExperimentEntry {
  std::string status = "running";  // running | done | failed
  double progress = 0.0;
  std::string error;
  fs::path dir;
};

ApiResponse error_response(const std::exception& e) {
  return {http_status_for(e), {{"error", e.what()}}};
}

std::vector<std::vector<ChatMessage>> recorded_requests(const fs::path& transcript) {
  std::vector<std::vector<ChatMessage>> out;
  if (!fs::exists(transcript)) return out;
  for (const auto& line : split_lines(read_file(transcript))) {
    if (trim(line).empty()) continue;
    auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.contains("messages")) continue;  // torn tail
    out.push_back(messages_from_json(doc["messages"]));
  }
  return out;
}

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  TemplateSet templates;
  Clock clock;

  std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;

  std::mutex experiments_mutex;
  std::map<std::string, std::shared_ptr<ExperimentEntry>> experiments;
  std::vector<std::thread> workers;

  httplib::Server server;
  std::thread server_thread;

  explicit Impl(ServiceConfig c)
      : cfg(std::move(c)),
        templates(TemplateSet::load(cfg.data_dir / "templates")),
        clock(cfg.clock ? cfg.clock : system_clock()) {}

  fs::path sessions_dir() const { return cfg.state_dir / "sessions"; }
  fs::path experiments_dir() const { return cfg.state_dir / "experiments"; }

  std::shared_ptr<ChatClient> session_teacher(const std::string& id, bool restoring) {
    fs::path path = sessions_dir() / (id + ".transcript.jsonl");
    auto past = restoring ? recorded_requests(path) : std::vector<std::vector<ChatMessage>>{};
    std::shared_ptr<ChatClient> client =
        make_client(cfg.teacher, std::make_shared<TranscriptLog>(path), clock);
    if (auto* mock = dynamic_cast<MockClient*>(client.get())) {
      for (const auto& messages : past) {
        try {
          mock->advance(messages);
        } catch (const ScriptExhausted&) {
          break;
        }
      }
    }
    return client;
  }

  std::shared_ptr<SessionEntry> find_session(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFound("unknown session " + id);
    return it->second;
  }

  void restore_all() {
    if (fs::is_directory(sessions_dir())) {
      for (const auto& entry : fs::directory_iterator(sessions_dir())) {
        std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".jsonl" || name.ends_with(".transcript.jsonl")) continue;
        std::string id = entry.path().stem().string();
        try {
          auto e = std::make_shared<SessionEntry>();
          e->session.emplace(
              AdaptiveSession::restore(entry.path(), session_teacher(id, true), templates, clock));
          sessions.emplace(id, std::move(e));
        } catch (const std::exception& ex) {
          spdlog::warn("skipping session {}: {}", id, ex.what());
        }
      }
    }
    if (fs::is_directory(experiments_dir())) {
      for (const auto& entry : fs::directory_iterator(experiments_dir())) {
        if (!entry.is_directory()) continue;
        auto e = std::make_shared<ExperimentEntry>();
        e->dir = entry.path();
        if (fs::exists(e->dir / "result.json")) {
          e->status = "done";
          e->progress = 1.0;
        } else {
          e->status = "failed";
          e->error = "interrupted before completion";
          if (fs::exists(e->dir / "error.txt")) e->error = read_file(e->dir / "error.txt");
        }
        experiments.emplace(entry.path().filename().string(), std::move(e));
      }
    }
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->restore_all();
}

Service::~Service() {
  stop();
  wait_experiments();
}

ApiResponse Service::create_session(const json& body) {
  try {
    if (!body.is_object() || !body.contains("curriculum") || !body["curriculum"].is_string()) {
      throw ValidationError("body needs a 'curriculum' name");
    }
    std::string name = body["curriculum"].get<std::string>();
    Curriculum curriculum = load_curriculum(locate_curriculum(name, impl_->cfg.data_dir));
    json overrides = body.value("config", json::object());
    for (const char* key : {"initial_difficulty", "pass_threshold", "required_streak", "policy",
                            "downweight", "seed"}) {
      if (body.contains(key)) overrides[key] = body[key];
    }
    SessionConfig config = SessionConfig::from_json(overrides, impl_->cfg.session_defaults);

    std::string id = random_hex_id();
    auto entry = std::make_shared<SessionEntry>();
    entry->session.emplace(AdaptiveSession::create(
        id, name, curriculum, config, impl_->session_teacher(id, false), impl_->templates,
        impl_->sessions_dir() / (id + ".jsonl"), impl_->clock));
    json out = {{"session_id", id},
                {"curriculum", name},
                {"config", config.to_json()},
                {"created_at", entry->session->created_at()}};
    {
      std::unique_lock lock(impl_->sessions_mutex);
      impl_->sessions.emplace(id, std::move(entry));
    }
    return {201, out};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::get_session(const std::string& id) {
  try {
    auto entry = impl_->find_session(id);
    std::lock_guard lock(entry->mutex);
    const auto& s = *entry->session;
    json chapters = json::array();
    for (const auto& c : s.state().chapters()) {
      chapters.push_back({{"chapter", chapter_to_json(c.chapter)},
                          {"difficulty", c.difficulty},
                          {"mastered", c.mastered}});
    }
    return {200,
            {{"session_id", id},
             {"curriculum", s.state().curriculum_name()},
             {"config", s.state().config().to_json()},
             {"created_at", s.created_at()},
             {"chapters", chapters},
             {"attempts", s.state().attempts().size()},
             {"complete", s.complete()}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::next_question(const std::string& id) {
  try {
    auto entry = impl_->find_session(id);
    std::lock_guard lock(entry->mutex);
    auto& s = *entry->session;
    auto q = s.next();
    if (!q) return {200, {{"complete", true}}};
    int difficulty = s.state().chapter(q->chapter).difficulty;
    return {200, {{"complete", false}, {"question", question_payload(*q, difficulty)}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::answer(const std::string& id, const json& body) {
  try {
    auto entry = impl_->find_session(id);
    if (!body.is_object() || !body.contains("question_id") || !body["question_id"].is_string()) {
      throw ValidationError("body needs 'question_id'");
    }
    const char* key = body.contains("label") ? "label" : "chosen";
    if (!body.contains(key) || !body[key].is_string()) throw ValidationError("body needs 'label'");
    auto label = label_from_string(body[key].get<std::string>());
    if (!label) throw ValidationError("label must be one of a, b, c, d");

    std::lock_guard lock(entry->mutex);
    auto& s = *entry->session;
    AnswerOutcome out = s.answer(body["question_id"].get<std::string>(), *label);
    return {200,
            {{"correct", out.correct},
             {"correct_label", std::string(1, to_char(out.correct_label))},
             {"new_difficulty", out.new_difficulty},
             {"mastered", out.mastered},
             {"complete", s.complete()}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::report(const std::string& id) {
  try {
    auto entry = impl_->find_session(id);
    std::lock_guard lock(entry->mutex);
    return {200, entry->session->report().to_json()};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::start_experiment(const json& body) {
  try {
    ExperimentConfig cfg = ExperimentConfig::from_json(body, impl_->cfg.config_base);
    // Fail fast on an unknown curriculum or topic.
    Curriculum curriculum = load_curriculum(locate_curriculum(cfg.curriculum, impl_->cfg.data_dir));
    if (!curriculum.resolve(cfg.topic)) throw NotFound("unknown topic " + to_string(cfg.topic));

    std::string id = random_hex_id();
    auto entry = std::make_shared<ExperimentEntry>();
    entry->dir = impl_->experiments_dir() / id;
    fs::create_directories(entry->dir);
    {
      std::lock_guard lock(impl_->experiments_mutex);
      impl_->experiments.emplace(id, entry);
      impl_->workers.emplace_back([this, cfg, entry] {
        RunOptions options;
        options.data_dir = impl_->cfg.data_dir;
        options.output_dir = entry->dir;
        options.progress = [this, entry](double p) {
          std::lock_guard lock(impl_->experiments_mutex);
          entry->progress = p;
        };
        std::string error;
        try {
          run_experiment(cfg, options);
        } catch (const std::exception& e) {
          error = e.what();
          spdlog::error("experiment failed: {}", error);
          try {
            write_file(entry->dir / "error.txt", error);
          } catch (const std::exception&) {
          }
        }
        std::lock_guard lock(impl_->experiments_mutex);
        entry->status = error.empty() ? "done" : "failed";
        entry->error = error;
        if (error.empty()) entry->progress = 1.0;
      });
    }
    return {202, {{"experiment_id", id}, {"status", "running"}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::experiment_status(const std::string& id) {
  try {
    std::shared_ptr<ExperimentEntry> entry;
    ExperimentEntry snapshot;
    {
      std::lock_guard lock(impl_->experiments_mutex);
      auto it = impl_->experiments.find(id);
      if (it == impl_->experiments.end()) throw NotFound("unknown experiment " + id);
      snapshot = *it->second;
    }
    json out = {{"experiment_id", id}, {"status", snapshot.status}};
    if (snapshot.status == "running") {
      out["progress"] = snapshot.progress;
    } else if (snapshot.status == "failed") {
      out["error"] = snapshot.error;
    } else {
      ExperimentResult result = ExperimentResult::load(snapshot.dir / "result.json");
      out["result"] = result.to_json();
      out["table"] = result.render_table_text();
    }
    return {200, out};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse Service::handle(const std::string& method, const std::string& path,
                            const std::string& body) {
  static const std::regex session_re(R"(^/sessions/([0-9a-fA-F]+)(/next|/answers|/report)?$)");
  static const std::regex experiment_re(R"(^/experiments/([0-9a-fA-F]+)$)");

  json doc;
  if (method == "POST") {
    doc = json::parse(body.empty() ? std::string("{}") : body, nullptr, false);
    if (doc.is_discarded()) return {400, {{"error", "request body is not valid JSON"}}};
  }
  std::smatch m;
  if (path == "/sessions" && method == "POST") return create_session(doc);
  if (path == "/experiments" && method == "POST") return start_experiment(doc);
  if (std::regex_match(path, m, session_re)) {
    std::string id = m[1];
    std::string tail = m[2];
    if (tail.empty() && method == "GET") return get_session(id);
    if (tail == "/next" && method == "GET") return next_question(id);
    if (tail == "/answers" && method == "POST") return answer(id, doc);
    if (tail == "/report" && method == "GET") return report(id);
    return {405, {{"error", "method not allowed"}}};
  }
  if (std::regex_match(path, m, experiment_re)) {
    if (method == "GET") return experiment_status(m[1]);
    return {405, {{"error", "method not allowed"}}};
  }
  return {404, {{"error", "no route for " + method + " " + path}}};
}

namespace {

void install_routes(httplib::Server& server, Service& service, const fs::path& static_dir) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const char* api = R"(/(sessions|experiments)(/.*)?)";
  server.Get(api, forward);
  server.Post(api, forward);
  if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", what}}.dump(), "application/json");
      });
}

}  // namespace

bool Service::listen(const std::string& host, int port) {
  install_routes(impl_->server, *this, impl_->cfg.static_dir);
  spdlog::info("listening on {}:{}", host, port);
  return impl_->server.listen(host, port);
}

int Service::start_background(const std::string& host) {
  install_routes(impl_->server, *this, impl_->cfg.static_dir);
  int port = impl_->server.bind_to_any_port(host);
  if (port < 0) return -1;
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::wait_experiments() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->experiments_mutex);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

}  // namespace adaptq
