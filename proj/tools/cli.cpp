#include "cli.hpp"

#include "adaptq/adaptive_session.hpp"
#include "adaptq/errors.hpp"
#include "adaptq/event_log.hpp"
#include "adaptq/experiment.hpp"
#include "adaptq/grading.hpp"
#include "adaptq/service.hpp"
#include "adaptq/student.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>

namespace adaptq::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  bool json = false;
  std::string data_dir;
  std::string state_dir;
  std::string settings;
};

struct ProviderFlags {
  std::string provider;
  std::string script;
  std::string endpoint;
  std::string model;
};

// Optional JSON settings file: {"teacher", "student", "session",
// "curriculum", "host", "port", "static_dir"}.
struct Settings {
  ProviderConfig teacher = ProviderConfig::teacher_defaults();
  ProviderConfig student = ProviderConfig::student_defaults();
  SessionConfig session;
  std::string curriculum = "grade9-math";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

struct Context {
  fs::path data_dir;
  fs::path state_dir;
  Settings settings;
  bool json = false;
};

Context make_context(const Common& c) {
  Context ctx;
  ctx.json = c.json;
  ctx.data_dir = c.data_dir.empty() ? default_data_dir() : fs::path(c.data_dir);
  if (!c.state_dir.empty()) {
    ctx.state_dir = c.state_dir;
  } else if (const char* env = std::getenv("ADAPTQ_STATE_DIR"); env && *env) {
    ctx.state_dir = env;
  } else {
    ctx.state_dir = ".adaptq";
  }
  if (!c.settings.empty()) {
    fs::path path = c.settings;
    json doc;
    try {
      doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw ParseError(0, path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("settings file must hold an object");
    fs::path base = path.parent_path();
    auto& s = ctx.settings;
    try {
      if (doc.contains("teacher")) {
        s.teacher = ProviderConfig::from_json(doc["teacher"], base, s.teacher);
      }
      if (doc.contains("student")) {
        s.student = ProviderConfig::from_json(doc["student"], base, s.student);
      }
      if (doc.contains("session")) s.session = SessionConfig::from_json(doc["session"]);
      s.curriculum = doc.value("curriculum", s.curriculum);
      s.host = doc.value("host", s.host);
      s.port = doc.value("port", s.port);
      s.static_dir = doc.value("static_dir", s.static_dir);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad settings file: ") + e.what());
    }
  }
  return ctx;
}

void add_common(CLI::App* app, Common& c, bool json_flag = true, bool settings_flag = true) {
  if (json_flag) app->add_flag("--json", c.json, "Machine-readable JSON on stdout");
  app->add_option("--data-dir", c.data_dir, "Directory holding curricula/ and templates/");
  app->add_option("--state-dir", c.state_dir, "Session and experiment storage (default .adaptq)");
  if (settings_flag) {
    app->add_option("--config", c.settings, "Settings file with provider configs")
        ->envname("ADAPTQ_CONFIG");
  }
}

void add_provider(CLI::App* app, ProviderFlags& p) {
  app->add_option("--provider", p.provider, "Teacher backend")
      ->check(CLI::IsMember({"mock", "remote"}));
  app->add_option("--script", p.script, "Mock script (implies --provider mock)");
  app->add_option("--endpoint", p.endpoint, "Remote base URL, e.g. https://api.openai.com/v1");
  app->add_option("--model", p.model, "Remote model name");
}

ProviderConfig apply(ProviderConfig cfg, const ProviderFlags& p) {
  if (!p.script.empty()) {
    cfg.backend = Backend::Mock;
    cfg.script_path = p.script;
  }
  if (p.provider == "mock") cfg.backend = Backend::Mock;
  if (p.provider == "remote") cfg.backend = Backend::Remote;
  if (!p.endpoint.empty()) cfg.endpoint = p.endpoint;
  if (!p.model.empty()) cfg.model = p.model;
  cfg.validate();
  return cfg;
}

Clock clock_for(const ProviderConfig& cfg) {
  return cfg.backend == Backend::Mock ? logical_clock() : system_clock();
}

std::shared_ptr<ChatClient> session_client(const ProviderConfig& cfg, const fs::path& transcript) {
  return make_client(cfg, std::make_shared<TranscriptLog>(transcript), clock_for(cfg));
}

fs::path session_log(const Context& ctx, const std::string& id) {
  return ctx.state_dir / "sessions" / (id + ".jsonl");
}

fs::path session_transcript(const Context& ctx, const std::string& id) {
  return ctx.state_dir / "sessions" / (id + ".transcript.jsonl");
}

// ---- curriculum -----------------------------------------------------------

int curriculum_validate(const Context& ctx, const std::string& file, std::ostream& out) {
  Curriculum c = load_curriculum(locate_curriculum(file, ctx.data_dir));
  std::size_t chapters = c.chapters().size();
  if (ctx.json) {
    out << json{{"valid", true}, {"subjects", c.subjects().size()}, {"chapters", chapters}}.dump()
        << "\n";
  } else {
    out << "ok: " << c.subjects().size() << " subjects, " << chapters << " chapters\n";
  }
  return kExitOk;
}

// ---- sessions -------------------------------------------------------------

struct SessionFlags {
  ProviderFlags provider;
  std::string curriculum;
  std::optional<std::uint64_t> seed;
  std::optional<int> pass_threshold;
  std::optional<int> streak;
  std::string resume;
  bool interactive = false;
  std::size_t max_questions = 200;
};

SessionConfig session_config(const Context& ctx, const SessionFlags& f) {
  SessionConfig cfg = ctx.settings.session;
  if (f.seed) cfg.seed = *f.seed;
  if (f.pass_threshold) cfg.pass_threshold = *f.pass_threshold;
  if (f.streak) cfg.required_streak = *f.streak;
  cfg.validate();
  return cfg;
}

std::string new_session_id(const SessionFlags& f) {
  return f.seed ? seeded_hex_id(*f.seed) : random_hex_id();
}

AdaptiveSession open_session(const Context& ctx, const SessionFlags& f,
                             std::shared_ptr<ChatClient> teacher, const std::string& id,
                             const ProviderConfig& provider) {
  TemplateSet templates = TemplateSet::load(ctx.data_dir / "templates");
  if (!f.resume.empty()) {
    return AdaptiveSession::restore(session_log(ctx, id), std::move(teacher), templates,
                                    clock_for(provider));
  }
  std::string name = f.curriculum.empty() ? ctx.settings.curriculum : f.curriculum;
  Curriculum curriculum = load_curriculum(locate_curriculum(name, ctx.data_dir));
  return AdaptiveSession::create(id, name, curriculum, session_config(ctx, f), std::move(teacher),
                                 templates, session_log(ctx, id), clock_for(provider));
}

int session_run(const Context& ctx, const SessionFlags& f, std::istream& in, std::ostream& out,
                std::ostream& err) {
  if (!f.interactive) throw CLI::ValidationError("session run", "requires --interactive");
  ProviderConfig provider = apply(ctx.settings.teacher, f.provider);
  std::string id = f.resume.empty() ? new_session_id(f) : f.resume;
  if (!f.resume.empty() && !fs::exists(session_log(ctx, id))) {
    throw NotFound("unknown session " + id);
  }
  auto teacher = session_client(provider, session_transcript(ctx, id));
  AdaptiveSession s = open_session(ctx, f, teacher, id, provider);

  out << "Curriculum: " << s.state().curriculum_name() << "\n";
  bool finished = false;
  while (true) {
    auto q = s.next();
    if (!q) {
      finished = true;
      break;
    }
    int difficulty = s.state().chapter(q->chapter).difficulty;
    out << "\n[" << to_string(q->chapter) << "] difficulty " << difficulty << "\n"
        << render_question_for_student(*q) << "\n";
    std::optional<Label> choice;
    while (!choice) {
      out << "Your answer (a-d, q to quit): " << std::flush;
      std::string line;
      if (!std::getline(in, line)) {
        out << "\n";
        break;
      }
      line = to_lower(trim(line));
      if (line == "q" || line == "quit") break;
      choice = label_from_string(line);
      if (!choice) out << "Please answer a, b, c, d or q.\n";
    }
    if (!choice) break;
    AnswerOutcome outcome = s.answer(q->id, *choice);
    if (outcome.correct) {
      out << "Correct.";
    } else {
      out << "Incorrect. The answer is " << to_char(outcome.correct_label) << ") "
          << q->options[static_cast<std::size_t>(index_of(outcome.correct_label))] << ".";
    }
    out << " Difficulty is now " << outcome.new_difficulty << ".";
    if (outcome.mastered) out << " Chapter mastered.";
    out << "\n";
  }
  out << "\n" << (finished ? "All chapters mastered.\n" : "Session paused.\n");
  out << s.report().render_text();
  err << "session " << id << " saved to " << session_log(ctx, id).string() << "\n";
  return kExitOk;
}

int simulate(const Context& ctx, const SessionFlags& f, std::ostream& out, std::ostream& err) {
  ProviderConfig provider = apply(ctx.settings.teacher, f.provider);
  std::string id = new_session_id(f);
  auto client = session_client(provider, session_transcript(ctx, id));
  AdaptiveSession s = open_session(ctx, f, client, id, provider);
  PromptBuilder prompts(s.curriculum(), TemplateSet::load(ctx.data_dir / "templates"));

  std::size_t asked = 0;
  std::size_t unreadable = 0;
  while (auto q = s.next()) {
    if (asked == f.max_questions) {
      err << "stopped after " << asked << " questions\n";
      break;
    }
    StudentRun run = answer_question(*client, prompts, *q, TeachingMode::zero_shot());
    // An unreadable reply is graded wrong: record the label after the key.
    Label chosen = run.label ? *run.label : kLabels[static_cast<std::size_t>((index_of(q->answer) + 1) % 4)];
    if (!run.label) ++unreadable;
    s.answer(q->id, chosen);
    ++asked;
  }
  SessionReport report = s.report();
  if (ctx.json) {
    json doc = report.to_json();
    doc["complete"] = s.complete();
    doc["unreadable_replies"] = unreadable;
    out << doc.dump(2) << "\n";
  } else {
    out << report.render_text();
    if (unreadable > 0) out << "Unreadable replies: " << unreadable << "\n";
  }
  return kExitOk;
}

int session_report_cmd(const Context& ctx, const std::string& id, std::ostream& out) {
  fs::path path = session_log(ctx, id);
  if (!fs::exists(path)) throw NotFound("unknown session " + id);
  SessionReport report = session_report(replay_session_log(path).state);
  if (ctx.json) {
    out << report.to_json().dump(2) << "\n";
  } else {
    out << report.render_text();
  }
  return kExitOk;
}

// ---- experiments ----------------------------------------------------------

struct ExperimentFlags {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool csv = false;
};

int experiment_run(const Context& ctx, const ExperimentFlags& f, std::ostream& out,
                   std::ostream& err) {
  ExperimentConfig cfg = ExperimentConfig::load(f.config);
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.source["seed"] = *f.seed;
  }
  std::string id = random_hex_id();
  RunOptions options;
  options.data_dir = ctx.data_dir;
  options.output_dir = f.out_dir.empty() ? ctx.state_dir / "experiments" / id : fs::path(f.out_dir);
  ExperimentRun run = run_experiment(cfg, options);
  if (ctx.json) {
    json doc = run.result.to_json();
    doc["output_dir"] = options.output_dir.string();
    out << doc.dump(2) << "\n";
  } else if (f.csv) {
    out << run.result.render_table_csv();
  } else {
    out << run.result.render_table_text();
  }
  err << "experiment written to " << options.output_dir.string() << "\n";
  return kExitOk;
}

fs::path result_path(const Context& ctx, const std::string& ref) {
  fs::path p = ref;
  if (fs::is_regular_file(p)) return p;
  if (fs::is_directory(p) && fs::exists(p / "result.json")) return p / "result.json";
  fs::path stored = ctx.state_dir / "experiments" / ref / "result.json";
  if (fs::exists(stored)) return stored;
  throw NotFound("no experiment result for '" + ref + "'");
}

int report_table2(const Context& ctx, const ExperimentFlags& f, std::ostream& out) {
  ExperimentResult result = ExperimentResult::load(result_path(ctx, f.config));
  if (ctx.json) {
    out << result.to_json().dump(2) << "\n";
  } else if (f.csv) {
    out << result.render_table_csv();
  } else {
    out << result.render_table_text();
  }
  return kExitOk;
}

// Bank topics carry no grade; find the curriculum that declares the topic.
Curriculum curriculum_for(const Context& ctx, const ChapterRef& topic, const std::string& name) {
  if (!name.empty()) return load_curriculum(locate_curriculum(name, ctx.data_dir));
  std::vector<fs::path> files;
  fs::path dir = ctx.data_dir / "curricula";
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    Curriculum c = load_curriculum(f);
    if (c.resolve(topic)) return c;
  }
  throw NotFound("no curriculum declares " + to_string(topic));
}

int export_finetune_cmd(const Context& ctx, const std::string& bank_path,
                        const std::string& out_path, const std::string& curriculum,
                        std::ostream& out) {
  QuestionBank bank = QuestionBank::load(bank_path);
  PromptBuilder prompts(curriculum_for(ctx, bank.topic, curriculum),
                        TemplateSet::load(ctx.data_dir / "templates"));
  export_finetune(bank, prompts, out_path);
  if (ctx.json) {
    out << json{{"records", bank.size()}, {"out", out_path}}.dump() << "\n";
  } else {
    out << "exported " << bank.size() << " records to " << out_path << "\n";
  }
  return kExitOk;
}

// ---- grading --------------------------------------------------------------

fs::path grades_store(const Context& ctx) { return ctx.state_dir / "grades.csv"; }

int grade_import(const Context& ctx, const std::vector<std::string>& files, bool replace,
                 std::ostream& out) {
  std::vector<GradingRecord> records;
  if (!replace && fs::exists(grades_store(ctx))) records = import_grades(grades_store(ctx));
  std::size_t added = 0;
  for (const auto& f : files) {
    auto incoming = import_grades(f);
    added += incoming.size();
    records.insert(records.end(), incoming.begin(), incoming.end());
  }
  // Re-parse the merged set so duplicates across files are caught.
  std::string merged = grades_to_csv(records);
  parse_grades(merged);
  write_file(grades_store(ctx), merged);
  if (ctx.json) {
    out << json{{"imported", added}, {"total", records.size()}}.dump() << "\n";
  } else {
    out << "imported " << added << " records (" << records.size() << " stored)\n";
  }
  return kExitOk;
}

struct Table1Flags {
  std::vector<std::string> grades;
  std::string rounding = "truncate";
  std::size_t per_cell = kGradesPerCell;
  bool csv = false;
};

int report_table1_cmd(const Context& ctx, const Table1Flags& f, std::ostream& out) {
  std::vector<GradingRecord> records;
  if (f.grades.empty()) {
    if (!fs::exists(grades_store(ctx))) throw NotFound("no grades imported; run 'grade import'");
    records = import_grades(grades_store(ctx));
  } else {
    for (const auto& g : f.grades) {
      auto part = import_grades(g);
      records.insert(records.end(), part.begin(), part.end());
    }
    parse_grades(grades_to_csv(records));
  }
  Table1 table = report_table1(records, f.per_cell, rounding_from_string(f.rounding));
  if (ctx.json) {
    out << table.to_json().dump(2) << "\n";
  } else if (f.csv) {
    out << table.render_csv();
  } else {
    out << table.render_text();
  }
  return kExitOk;
}

// ---- serve ----------------------------------------------------------------

struct ServeFlags {
  ProviderFlags provider;
  std::string host;
  int port = 0;
  std::string static_dir;
};

int serve(const Context& ctx, const ServeFlags& f) {
  ServiceConfig cfg;
  cfg.data_dir = ctx.data_dir;
  cfg.state_dir = ctx.state_dir;
  cfg.teacher = apply(ctx.settings.teacher, f.provider);
  cfg.session_defaults = ctx.settings.session;
  cfg.static_dir = f.static_dir.empty() ? ctx.settings.static_dir : f.static_dir;
  cfg.clock = clock_for(cfg.teacher);
  Service service(cfg);
  std::string host = f.host.empty() ? ctx.settings.host : f.host;
  int port = f.port > 0 ? f.port : ctx.settings.port;
  if (!service.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
  return kExitOk;
}

const CLI::App* deepest(const CLI::App* app) {
  for (const auto* sub : app->get_subcommands()) return deepest(sub);
  return app;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Adaptive question generation, sessions and teacher/student experiments",
               "adaptq"};
  app.require_subcommand(1);
  Common common;

  auto* curriculum = app.add_subcommand("curriculum", "Curriculum files");
  curriculum->require_subcommand(1);
  auto* cur_validate = curriculum->add_subcommand("validate", "Check a curriculum file");
  std::string curriculum_file;
  cur_validate->add_option("file", curriculum_file, "Curriculum file or name")->required();
  add_common(cur_validate, common);

  SessionFlags sflags;
  auto* session = app.add_subcommand("session", "Adaptive sessions");
  session->require_subcommand(1);
  auto* session_run_cmd = session->add_subcommand("run", "Take a session in the terminal");
  session_run_cmd->add_flag("--interactive", sflags.interactive, "Read answers from stdin");
  session_run_cmd->add_option("--curriculum", sflags.curriculum, "Curriculum name or file");
  session_run_cmd->add_option("--seed", sflags.seed, "Seed for the session id and selection");
  session_run_cmd->add_option("--pass-threshold", sflags.pass_threshold, "Mastery threshold T");
  session_run_cmd->add_option("--streak", sflags.streak, "Correct answers needed, K");
  session_run_cmd->add_option("--resume", sflags.resume, "Continue a stored session");
  add_provider(session_run_cmd, sflags.provider);
  add_common(session_run_cmd, common, false);
  auto* session_report = session->add_subcommand("report", "Report of a stored session");
  std::string session_id;
  session_report->add_option("id", session_id, "Session id")->required();
  add_common(session_report, common);

  auto* simulate_cmd = app.add_subcommand("simulate", "Session answered by a scripted student");
  simulate_cmd->add_option("--curriculum", sflags.curriculum, "Curriculum name or file");
  simulate_cmd->add_option("--seed", sflags.seed, "Seed for the session id and selection");
  simulate_cmd->add_option("--pass-threshold", sflags.pass_threshold, "Mastery threshold T");
  simulate_cmd->add_option("--streak", sflags.streak, "Correct answers needed, K");
  simulate_cmd->add_option("--max-questions", sflags.max_questions, "Stop after this many");
  simulate_cmd->add_option("--script", sflags.provider.script, "Mock script for both roles")
      ->required();
  add_common(simulate_cmd, common);

  ExperimentFlags eflags;
  auto* experiment = app.add_subcommand("experiment", "Teacher/student experiments");
  experiment->require_subcommand(1);
  auto* experiment_run_cmd = experiment->add_subcommand("run", "Run an experiment config");
  experiment_run_cmd->add_option("--config", eflags.config, "Experiment config")->required();
  experiment_run_cmd->add_option("--out", eflags.out_dir, "Output directory");
  experiment_run_cmd->add_option("--seed", eflags.seed, "Override the split seed");
  experiment_run_cmd->add_flag("--csv", eflags.csv, "CSV table on stdout");
  add_common(experiment_run_cmd, common, true, false);

  auto* export_cmd = app.add_subcommand("export-finetune", "Write fine-tuning JSON lines");
  std::string bank_path;
  std::string export_out;
  std::string export_curriculum;
  export_cmd->add_option("--bank", bank_path, "bank.json from an experiment")->required();
  export_cmd->add_option("--out", export_out, "Output file")->required();
  export_cmd->add_option("--curriculum", export_curriculum, "Curriculum holding the topic");
  add_common(export_cmd, common);

  auto* grade = app.add_subcommand("grade", "Manual grading records");
  grade->require_subcommand(1);
  auto* grade_import_cmd = grade->add_subcommand("import", "Store grading CSV files");
  std::vector<std::string> grade_files;
  bool grade_replace = false;
  grade_import_cmd->add_option("csv", grade_files, "Grading CSV files")->required();
  grade_import_cmd->add_flag("--replace", grade_replace, "Discard previously imported grades");
  add_common(grade_import_cmd, common);

  auto* report = app.add_subcommand("report", "Result tables");
  report->require_subcommand(1);
  Table1Flags t1;
  auto* table1 = report->add_subcommand("table1", "Per-course, per-model grading percentages");
  table1->add_option("--grades", t1.grades, "Grading CSV files (default: imported grades)");
  table1->add_option("--rounding", t1.rounding, "truncate or half-up")
      ->check(CLI::IsMember({"truncate", "half-up"}));
  table1->add_option("--per-cell", t1.per_cell, "Records required per cell");
  table1->add_flag("--csv", t1.csv, "CSV output");
  add_common(table1, common);
  auto* table2 = report->add_subcommand("table2", "Per-level, per-condition percentages");
  table2->add_option("--experiment", eflags.config, "Experiment id, directory or result file")
      ->required();
  table2->add_flag("--csv", eflags.csv, "CSV output");
  add_common(table2, common);

  ServeFlags serve_flags;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API and static web UI");
  serve_cmd->add_option("--host", serve_flags.host, "Bind address (default 127.0.0.1)");
  serve_cmd->add_option("--port", serve_flags.port, "Port (default 8080)");
  serve_cmd->add_option("--static", serve_flags.static_dir, "Directory served at /");
  add_provider(serve_cmd, serve_flags.provider);
  add_common(serve_cmd, common, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << deepest(&app)->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << deepest(&app)->help();
    return kExitUsage;
  }

  try {
    Context ctx = make_context(common);
    if (cur_validate->parsed()) return curriculum_validate(ctx, curriculum_file, out);
    if (session_run_cmd->parsed()) return session_run(ctx, sflags, in, out, err);
    if (session_report->parsed()) return session_report_cmd(ctx, session_id, out);
    if (simulate_cmd->parsed()) return simulate(ctx, sflags, out, err);
    if (experiment_run_cmd->parsed()) return experiment_run(ctx, eflags, out, err);
    if (export_cmd->parsed()) {
      return export_finetune_cmd(ctx, bank_path, export_out, export_curriculum, out);
    }
    if (grade_import_cmd->parsed()) return grade_import(ctx, grade_files, grade_replace, out);
    if (table1->parsed()) return report_table1_cmd(ctx, t1, out);
    if (table2->parsed()) return report_table2(ctx, eflags, out);
    if (serve_cmd->parsed()) return serve(ctx, serve_flags);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n\n" << deepest(&app)->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    if (common.json) out << json{{"error", e.what()}}.dump() << "\n";
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace adaptq::cli
