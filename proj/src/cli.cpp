#include "esp/cli.hpp"

#include <fmt/format.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "esp/config.hpp"
#include "esp/evaluator.hpp"
#include "esp/fixtures.hpp"
#include "esp/hash.hpp"
#include "esp/integrator.hpp"
#include "esp/planner.hpp"
#include "esp/registry.hpp"
#include "esp/responder.hpp"

namespace esp::cli {

namespace {

namespace fs = std::filesystem;

// Everything one pipeline run needs, wired either for real backends or for
// the in-process mock stack.
struct Pipeline {
  AppConfig config;
  RankedCatalog catalog;
  std::shared_ptr<LlmTransport> transport;
  std::unique_ptr<fixtures::FixtureModelServer> model_server;  // mock only
  std::unique_ptr<LlmGateway> planner_llm;
  std::unique_ptr<LlmGateway> arbiter_llm;
  std::unique_ptr<LlmGateway> responder_llm;
  std::unique_ptr<LlmGateway> judge_llm;
  HttpModelInvoker invoker;
};

constexpr const char* kFixtureScheme = "fixture://";

Pipeline make_pipeline(const GlobalFlags& flags, bool need_catalog) {
  Pipeline p;
  p.config = load_config(flags.config_path);

  if (flags.mock) {
    if (p.config.mock_llm_script.empty()) {
      throw Error(ErrorCode::ConfigError, "/mock/llm_script: required for --mock runs");
    }
    p.transport = MockLlmTransport::from_file(p.config.mock_llm_script);
  } else {
    p.transport = std::make_shared<HttpLlmTransport>();
  }
  auto gateway = [&p](const std::string& role) {
    return std::make_unique<LlmGateway>(p.transport, p.config.profile_for(role));
  };
  p.planner_llm = gateway(p.config.planner_profile);
  p.arbiter_llm = gateway(p.config.arbiter_profile);
  p.responder_llm = gateway(p.config.responder_profile);
  p.judge_llm = gateway(p.config.judge_profile);

  if (need_catalog) {
    if (p.config.catalog_snapshot.empty()) {
      throw Error(ErrorCode::ConfigError, "/catalog_snapshot: required for this command");
    }
    p.catalog = load_snapshot(p.config.catalog_snapshot);

    if (flags.mock) {
      if (p.config.mock_model_script.empty()) {
        throw Error(ErrorCode::ConfigError, "/mock/model_script: required for --mock runs");
      }
      p.model_server = std::make_unique<fixtures::FixtureModelServer>(flags.seed);
      p.model_server->load_script_file(p.config.mock_model_script);
      p.model_server->start();
      // Snapshot endpoints use fixture://<name>; bind them to the live port.
      for (auto& [id, model] : p.catalog.models) {
        if (model.endpoint.rfind(kFixtureScheme, 0) == 0) {
          model.endpoint =
              p.model_server->endpoint_for(model.endpoint.substr(std::strlen(kFixtureScheme)));
        }
      }
    }
  }
  return p;
}

RunResult execute_plan(Pipeline& p, const TaskPlan& plan) {
  CandidateSelector selector = [&p](const Subtask& subtask) {
    return select_models(subtask.task_type, p.catalog, p.config.policy);
  };
  IntegratorHook hook = [&p](const Subtask& subtask,
                             const std::vector<CandidateResult>& ok_candidates) {
    return integrate(subtask, ok_candidates, p.config.embedding, p.arbiter_llm.get(),
                     p.config.arbitration);
  };
  return run_plan(plan, selector, hook, p.invoker, p.config.limits);
}

std::string read_request_text(const std::string& text_or_file) {
  if (fs::exists(text_or_file) && fs::is_regular_file(text_or_file)) {
    std::ifstream in(text_or_file);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
  }
  return text_or_file;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
}

}  // namespace

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const std::string& request_text_or_file, const GlobalFlags& flags, std::ostream& out,
            std::ostream& err) {
  try {
    Pipeline p = make_pipeline(flags, /*need_catalog=*/true);

    UserRequest request;
    request.text = read_request_text(request_text_or_file);
    request.id = "req-" + sha256_hex(request.text).substr(0, 12);
    if (request.text.empty()) {
      err << "error: empty request\n";
      return 1;
    }

    PlanResult planned = plan(request, p.config.planner, *p.planner_llm, p.config.vocabulary);
    RunResult run = execute_plan(p, planned.plan);
    FinalResponse response =
        respond(request, planned.plan, run, p.responder_llm.get(), p.config.responder);

    const std::string rendered = to_json(response).dump(2) + "\n";
    out << rendered;
    if (!flags.out.empty()) write_file(flags.out, rendered);
    if (!flags.trace.empty()) {
      Json decisions = Json::object();
      for (const auto& [id, decision] : run.decisions) {
        decisions[std::to_string(id)] = to_json(decision);
      }
      write_file(flags.trace,
                 Json{{"trace", to_json(run.trace)}, {"decisions", decisions}}.dump(2) + "\n");
    }

    return response.failed_subtasks.empty() ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& dataset_path, const GlobalFlags& flags, std::ostream& out,
             std::ostream& err) {
  try {
    Pipeline p = make_pipeline(flags, /*need_catalog=*/!flags.planner_only);
    Dataset dataset = load_dataset(dataset_path);
    for (const DatasetDiagnostic& d : dataset.diagnostics) {
      err << fmt::format("dataset line {}: {}\n", d.line, d.message);
    }

    std::vector<RecordMetrics> metrics;
    metrics.reserve(dataset.records.size());
    for (EvalRecord& record : dataset.records) {
      UserRequest request{record.id, record.text, {}};
      try {
        PlanResult planned =
            plan(request, p.config.planner, *p.planner_llm, p.config.vocabulary);
        record.predicted_plan = planned.plan;
        if (!flags.planner_only) {
          execute_plan(p, planned.plan);
        }
      } catch (const Error&) {
        record.predicted_plan.reset();  // scored as the empty plan
      }
      metrics.push_back(score_record(record, p.judge_llm.get(), p.config.judge_template));
    }

    MetricReport report = aggregate(metrics);
    const std::string table = report_to_table(report);
    const std::string json_text = report_to_json(report).dump(2) + "\n";
    out << table;

    if (!flags.out.empty()) {
      fs::create_directories(flags.out);
      write_file((fs::path(flags.out) / "report.json").string(), json_text);
      write_file((fs::path(flags.out) / "report.txt").string(), table);
    }

    if (!dataset.diagnostics.empty() || report.parse_failures > 0) return 2;
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// sync
// ---------------------------------------------------------------------------

int cmd_sync(const std::string& hub_endpoint, const std::vector<std::string>& task_types,
             const std::string& snapshot_path, const GlobalFlags& flags, std::ostream& out,
             std::ostream& err) {
  try {
    SyncOptions options;
    options.task_types.insert(task_types.begin(), task_types.end());
    options.snapshot_path = snapshot_path;
    if (!flags.config_path.empty()) {
      AppConfig config = load_config(flags.config_path);
      if (options.task_types.empty()) options.task_types = config.vocabulary;
      if (options.snapshot_path.empty()) options.snapshot_path = config.catalog_snapshot;
    }
    if (options.task_types.empty()) {
      err << "error: no task types given (pass --types or --config)\n";
      return 1;
    }

    RankedCatalog catalog = sync_catalog(hub_endpoint, options);
    if (catalog.stale) {
      err << "warning: hub unreachable; using stale snapshot "
          << options.snapshot_path << "\n";
    }

    std::map<std::string, int> counts;
    for (const auto& [id, model] : catalog.models) ++counts[model.task_type];
    for (const auto& [type, count] : counts) {
      out << fmt::format("{}: {} models\n", type, count);
    }
    out << fmt::format("total: {} models across {} task types\n", catalog.models.size(),
                       counts.size());
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace esp::cli
