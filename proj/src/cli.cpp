#include "nl2api/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nl2api/config.hpp"
#include "nl2api/error.hpp"
#include "nl2api/evaluator.hpp"
#include "nl2api/runtime.hpp"
#include "nl2api/service.hpp"
#include "nl2api/util.hpp"

namespace nl2api {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::string mode;
};

Config load_config_or_default(const Globals& g) {
  if (!g.config_path.empty()) return load_config(g.config_path);
  return Config{};
}

std::optional<RunMode> mode_override(const Globals& g) {
  if (g.mode.empty()) return std::nullopt;
  return parse_run_mode(g.mode);
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NotFound:
    case ErrorKind::InvalidArgument:
    case ErrorKind::MalformedConfig:
      return kExitUsage;
    case ErrorKind::BackendUnavailable:
    case ErrorKind::MissingCredential:
    case ErrorKind::Unauthorized:
    case ErrorKind::Transport:
    case ErrorKind::Timeout:
      return kExitBackend;
    case ErrorKind::NoQueryFound:
      return kExitNoQuery;
    default:
      return kExitFailure;
  }
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw)
    for (auto& part : split(item, ','))
      if (auto t = trim(part); !t.empty()) out.push_back(t);
  return out;
}

std::string outcome_key(const EvalOutcome& o) {
  return o.entry_id + '\x1f' + std::string(to_string(o.strategy)) + '\x1f' + o.model + '\x1f' +
         std::string(to_string(o.dialect));
}

// Later records for the same (entry, combo) replace earlier ones.
std::vector<EvalOutcome> read_outcomes(const std::filesystem::path& path) {
  std::vector<EvalOutcome> ordered;
  if (!std::filesystem::exists(path)) return ordered;
  std::map<std::string, std::size_t> slot;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // a torn final line from an interrupted run
    auto o = EvalOutcome::from_json(j);
    auto key = outcome_key(o);
    if (auto it = slot.find(key); it != slot.end()) {
      ordered[it->second] = std::move(o);
    } else {
      slot.emplace(key, ordered.size());
      ordered.push_back(std::move(o));
    }
  }
  return ordered;
}

std::string first_section(const std::string& markdown) {
  auto next = markdown.find("\n## ", 1);
  return next == std::string::npos ? markdown : markdown.substr(0, next + 1);
}

// ---------------------------------------------------------------------------

struct IndexOptions {
  std::string corpus;
  std::string out;
  std::string backend;
};

int cmd_index(const Globals& g, const IndexOptions& o, std::ostream& out) {
  auto config = load_config_or_default(g);
  auto mode = mode_override(g).value_or(config.run.mode);
  if (!o.backend.empty()) {
    if (o.backend == "hashing") config.embedding.backend = EmbeddingBackendKind::Hashing;
    else if (o.backend == "fixture") config.embedding.backend = EmbeddingBackendKind::Fixture;
    else if (o.backend == "http") config.embedding.backend = EmbeddingBackendKind::Http;
    else throw Error(ErrorKind::InvalidArgument, "unknown embedding backend '" + o.backend + "' (valid: hashing, fixture, http)");
  }
  std::filesystem::path corpus_path = o.corpus.empty() ? config.data.corpus : std::filesystem::path(o.corpus);
  if (corpus_path.empty()) throw Error(ErrorKind::InvalidArgument, "no corpus given (--corpus or data.corpus)");
  auto corpus = load_corpus(corpus_path);
  std::filesystem::path out_path = o.out.empty() ? config.rag.index : std::filesystem::path(o.out);
  if (out_path.empty()) throw Error(ErrorKind::InvalidArgument, "no output path given (--out or rag.index)");

  HttplibClient http;
  auto embedder = make_embedder(config.embedding, mode, http);
  auto index = build_index(corpus, embedder.get());
  save_index(index, out_path);
  out << "indexed " << index.size() << " entries, dimension " << index.dimension << ", backend " << index.backend_id
      << " -> " << out_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string corpus;
  std::string dev_corpus;
  std::vector<std::string> strategies;
  std::vector<std::string> models;
  std::vector<std::string> dialects;
  std::string out_dir = "nl2api-run";
  std::size_t jobs = 0;
  bool fresh = false;
  bool macro = false;
  bool valid_only_result = false;
  int decimals = 0;
};

struct ReportOptions {
  std::string outcomes;
  std::string format = "markdown";
  bool macro = false;
  bool valid_only_result = false;
  int decimals = 0;
  std::string write_dir;
};

void write_reports(const std::vector<EvalOutcome>& outcomes, const std::filesystem::path& dir, bool macro,
                   bool valid_only, int decimals, std::string* markdown_out) {
  auto rows = aggregate(outcomes, {macro, valid_only});
  auto md = render_report(rows, ReportFormat::Markdown, {decimals});
  write_file(dir / "report.md", md);
  write_file(dir / "report.csv", render_report(rows, ReportFormat::Csv));
  if (markdown_out) *markdown_out = md;
}

int cmd_eval(const Globals& g, const EvalOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<Strategy> strategies;
  for (const auto& s : split_list(o.strategies)) strategies.push_back(parse_strategy(s));
  if (strategies.empty()) strategies = all_strategies();
  std::vector<Dialect> dialects;
  for (const auto& d : split_list(o.dialects)) dialects.push_back(parse_dialect(d));
  if (dialects.empty()) dialects = {Dialect::Rest, Dialect::GraphQL};

  auto config = load_config_or_default(g);
  RuntimeOverrides overrides;
  overrides.mode = mode_override(g);
  if (!o.corpus.empty()) overrides.corpus = o.corpus;
  if (!o.dev_corpus.empty()) overrides.dev_corpus = o.dev_corpus;
  Runtime rt(config, overrides);

  auto models = split_list(o.models);
  if (models.empty()) models = config.llm.models;
  const std::size_t jobs = std::max<std::size_t>(1, o.jobs ? o.jobs : config.run.jobs);

  bool needs_index = std::any_of(strategies.begin(), strategies.end(),
                                 [](Strategy s) { return s != Strategy::PromptEngineering; });
  auto deps = rt.deps(needs_index);

  std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);
  auto outcomes_path = dir / "outcomes.jsonl";
  auto traces_path = dir / "traces.jsonl";
  if (o.fresh) {
    std::filesystem::remove(outcomes_path);
    std::filesystem::remove(traces_path);
  }

  std::set<std::string> done;
  for (const auto& prev : read_outcomes(outcomes_path))
    if (prev.scored) done.insert(outcome_key(prev));

  std::size_t ran = 0;
  std::size_t skipped = 0;
  for (auto strategy : strategies) {
    for (const auto& model : models) {
      for (auto dialect : dialects) {
        std::vector<const CorpusEntry*> pending;
        for (const auto& entry : rt.eval_set().entries) {
          if (!entry.query(dialect)) continue;
          EvalOutcome probe;
          probe.entry_id = entry.id;
          probe.strategy = strategy;
          probe.model = model;
          probe.dialect = dialect;
          if (done.count(outcome_key(probe))) {
            ++skipped;
            continue;
          }
          pending.push_back(&entry);
        }

        for (std::size_t start = 0; start < pending.size(); start += jobs) {
          const std::size_t n = std::min(jobs, pending.size() - start);
          std::vector<GenerationTrace> traces(n);
          std::vector<EvalOutcome> outcomes(n);
          std::vector<std::exception_ptr> failures(n);
          auto work = [&](std::size_t i) {
            try {
              const auto& entry = *pending[start + i];
              traces[i] = generate(entry.question, strategy, dialect, model, deps);
              outcomes[i] = evaluate_sample(entry, traces[i], rt.executor());
            } catch (...) {
              failures[i] = std::current_exception();
            }
          };
          if (n == 1) {
            work(0);
          } else {
            std::vector<std::thread> workers;
            for (std::size_t i = 0; i < n; ++i) workers.emplace_back(work, i);
            for (auto& t : workers) t.join();
          }
          // Written in entry order regardless of completion order.
          for (std::size_t i = 0; i < n; ++i) {
            if (failures[i]) std::rethrow_exception(failures[i]);
            ordered_json tline;
            tline["entry_id"] = pending[start + i]->id;
            tline["trace"] = traces[i].to_json();
            append_line(traces_path, tline.dump());
            append_line(outcomes_path, outcomes[i].to_json().dump());
            if (!outcomes[i].scored) err << "unscored " << outcomes[i].entry_id << ": " << outcomes[i].unscored_reason << "\n";
            ++ran;
          }
        }
      }
    }
  }

  auto all = read_outcomes(outcomes_path);
  std::string md;
  write_reports(all, dir, o.macro, o.valid_only_result, o.decimals, &md);

  std::size_t scored = 0;
  for (const auto& oc : all) scored += oc.scored ? 1 : 0;
  out << first_section(md);
  out << "\nsamples: " << all.size() << " (" << scored << " scored, " << all.size() - scored << " unscored; " << ran
      << " evaluated now, " << skipped << " resumed)\n";
  out << "reports: " << (dir / "report.md").string() << ", " << (dir / "report.csv").string() << "\n";
  if (scored == 0) {
    err << "no sample was scored\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  if (!std::filesystem::exists(o.outcomes))
    throw Error(ErrorKind::NotFound, "outcomes file not found: " + o.outcomes, o.outcomes);
  auto all = read_outcomes(o.outcomes);
  auto rows = aggregate(all, {o.macro, o.valid_only_result});
  ReportFormat format;
  if (o.format == "markdown" || o.format == "md") format = ReportFormat::Markdown;
  else if (o.format == "csv") format = ReportFormat::Csv;
  else throw Error(ErrorKind::InvalidArgument, "unknown format '" + o.format + "' (valid: markdown, csv)");
  out << render_report(rows, format, {o.decimals});
  if (!o.write_dir.empty()) write_reports(all, o.write_dir, o.macro, o.valid_only_result, o.decimals, nullptr);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AskOptions {
  std::string question;
  std::string strategy = "agentic";
  std::string model;
  std::string dialect = "REST";
  std::size_t show = 10;
};

int cmd_ask(const Globals& g, const AskOptions& o, std::ostream& out, std::ostream& err) {
  auto strategy = parse_strategy(o.strategy);
  auto dialect = parse_dialect(o.dialect);
  if (trim(o.question).empty()) throw Error(ErrorKind::InvalidArgument, "question must not be empty");
  auto config = load_config_or_default(g);
  RuntimeOverrides overrides;
  overrides.mode = mode_override(g);
  Runtime rt(config, overrides);
  auto model = o.model.empty() ? config.llm.models.front() : o.model;

  auto trace = generate(o.question, strategy, dialect, model, rt.deps(strategy != Strategy::PromptEngineering));
  if (trace.error) {
    if (trace.error->kind == ErrorKind::NoQueryFound) {
      err << "model produced no query\n";
      return kExitNoQuery;
    }
    err << to_string(trace.error->kind) << ": " << trace.error->message << "\n";
    return exit_code_for(Error(trace.error->kind, trace.error->message));
  }

  auto result = rt.executor().execute(*trace.extracted_query, dialect);
  ordered_json report;
  report["query"] = *trace.extracted_query;
  report["dialect"] = std::string(to_string(dialect));
  report["strategy"] = std::string(to_string(strategy));
  report["model"] = model;
  report["valid"] = result.valid;
  report["status"] = result.status;
  report["source"] = std::string(to_string(result.source));
  report["result_count"] = result.result_ids.size();
  auto ids = json::array();
  for (auto id : result.result_ids) {
    if (ids.size() >= o.show) break;
    ids.push_back(id);
  }
  report["result_ids"] = ids;
  report["warnings"] = trace.warnings;
  for (const auto& w : result.warnings) report["warnings"].push_back(w);
  report["trace"] = trace.digest();
  out << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeOptions {
  std::string host;
  int port = -1;
};

Service* g_running_service = nullptr;

extern "C" void stop_on_signal(int) {
  if (g_running_service) g_running_service->stop();
}

int cmd_serve(const Globals& g, const ServeOptions& o, std::ostream& out, std::ostream& err) {
  auto config = load_config_or_default(g);
  RuntimeOverrides overrides;
  overrides.mode = mode_override(g);
  auto rt = std::make_shared<Runtime>(config, overrides);
  Service service(rt, &err);
  auto host = o.host.empty() ? config.service.host : o.host;
  auto port = service.bind(host, o.port >= 0 ? o.port : config.service.port);
  if (port < 0) {
    err << "cannot bind " << host << "\n";
    return kExitFailure;
  }
  out << "listening on http://" << host << ":" << port << " (mode " << to_string(rt->mode()) << ")" << std::endl;
  g_running_service = &service;
  std::signal(SIGINT, stop_on_signal);
  std::signal(SIGTERM, stop_on_signal);
  service.run();
  g_running_service = nullptr;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct LintOptions {
  std::string corpus;
  std::string vocabulary;
};

int cmd_lint(const Globals& g, const LintOptions& o, std::ostream& out) {
  auto config = load_config_or_default(g);
  std::filesystem::path corpus_path = o.corpus.empty() ? config.data.corpus : std::filesystem::path(o.corpus);
  std::filesystem::path vocab_path = o.vocabulary.empty() ? config.data.vocabulary : std::filesystem::path(o.vocabulary);
  if (corpus_path.empty() || vocab_path.empty())
    throw Error(ErrorKind::InvalidArgument, "lint needs a corpus and a vocabulary");
  auto corpus = load_corpus(corpus_path);
  auto vocab = load_vocabulary(vocab_path);
  std::size_t rest = 0;
  std::size_t gql = 0;
  for (const auto& e : corpus.entries) {
    rest += e.rest_query ? 1 : 0;
    gql += e.graphql_query ? 1 : 0;
  }
  auto warnings = lint_corpus(corpus, vocab);
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  out << corpus.size() << " entries (" << rest << " REST, " << gql << " GraphQL), " << warnings.size()
      << " warning(s)\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Translate questions into Land Matrix API queries and benchmark the results", "nl2api"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Configuration file (JSON)");
  app.add_option("--mode", g.mode, "live, cassette or record")->check(CLI::IsMember({"live", "cassette", "record"}));
  app.set_version_flag("--version", std::string(kVersion));

  IndexOptions index_opts;
  auto* index_cmd = app.add_subcommand("index", "Embed corpus questions and write the vector index");
  index_cmd->add_option("--corpus", index_opts.corpus, "Corpus file (defaults to data.corpus)");
  index_cmd->add_option("--out", index_opts.out, "Index file (defaults to rag.index)");
  index_cmd->add_option("--backend", index_opts.backend, "hashing, fixture or http");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Run the benchmark over the test split");
  eval_cmd->add_option("--corpus", eval_opts.corpus, "Corpus file (defaults to data.corpus)");
  eval_cmd->add_option("--dev-corpus", eval_opts.dev_corpus, "Retrieval pool; evaluates the whole --corpus");
  eval_cmd->add_option("--strategies", eval_opts.strategies, "Comma-separated strategy ids");
  eval_cmd->add_option("--models", eval_opts.models, "Comma-separated model ids");
  eval_cmd->add_option("--dialects", eval_opts.dialects, "Comma-separated REST, GRAPHQL (default: both)");
  eval_cmd->add_option("--out", eval_opts.out_dir, "Output directory");
  eval_cmd->add_option("--jobs", eval_opts.jobs, "Samples evaluated in parallel");
  eval_cmd->add_flag("--fresh", eval_opts.fresh, "Discard earlier outcomes instead of resuming");
  eval_cmd->add_flag("--macro", eval_opts.macro, "Macro-average filter scores");
  eval_cmd->add_flag("--valid-only-result", eval_opts.valid_only_result, "Average Valid Result over valid queries only");
  eval_cmd->add_option("--decimals", eval_opts.decimals, "Decimals in markdown percentages")->check(CLI::Range(0, 6));

  ReportOptions report_opts;
  auto* report_cmd = app.add_subcommand("report", "Render reports from an outcomes file");
  report_cmd->add_option("outcomes", report_opts.outcomes, "outcomes.jsonl")->required();
  report_cmd->add_option("--format", report_opts.format, "markdown or csv");
  report_cmd->add_flag("--macro", report_opts.macro, "Macro-average filter scores");
  report_cmd->add_flag("--valid-only-result", report_opts.valid_only_result, "Average Valid Result over valid queries only");
  report_cmd->add_option("--decimals", report_opts.decimals, "Decimals in markdown percentages")->check(CLI::Range(0, 6));
  report_cmd->add_option("--write", report_opts.write_dir, "Also write report.md and report.csv here");

  AskOptions ask_opts;
  auto* ask_cmd = app.add_subcommand("ask", "Generate and execute one query");
  ask_cmd->add_option("question", ask_opts.question, "Natural-language question")->required();
  ask_cmd->add_option("--strategy", ask_opts.strategy, "prompt_engineering, rag or agentic");
  ask_cmd->add_option("--model", ask_opts.model, "Model id (defaults to the first configured)");
  ask_cmd->add_option("--dialect", ask_opts.dialect, "REST or GRAPHQL");
  ask_cmd->add_option("--show", ask_opts.show, "Result ids to print");

  ServeOptions serve_opts;
  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
  serve_cmd->add_option("--host", serve_opts.host, "Bind address");
  serve_cmd->add_option("--port", serve_opts.port, "Port (0 picks a free one)");

  LintOptions lint_opts;
  auto* lint_cmd = app.add_subcommand("lint", "Check corpus filters against the vocabulary");
  lint_cmd->add_option("--corpus", lint_opts.corpus, "Corpus file");
  lint_cmd->add_option("--vocabulary", lint_opts.vocabulary, "Vocabulary file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*index_cmd) return cmd_index(g, index_opts, out);
    if (*eval_cmd) return cmd_eval(g, eval_opts, out, err);
    if (*report_cmd) return cmd_report(report_opts, out);
    if (*ask_cmd) return cmd_ask(g, ask_opts, out, err);
    if (*serve_cmd) return cmd_serve(g, serve_opts, out, err);
    if (*lint_cmd) return cmd_lint(g, lint_opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace nl2api
