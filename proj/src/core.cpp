#include "esp/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <functional>

namespace esp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::Unavailable: return "Unavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::VocabularyViolation: return "VocabularyViolation";
    case ErrorCode::NoModelsAvailable: return "NoModelsAvailable";
    case ErrorCode::UnresolvedDependency: return "UnresolvedDependency";
    case ErrorCode::SubtaskFailed: return "SubtaskFailed";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Precondition: return "Precondition";
  }
  return "Unknown";
}

const char* to_string(RefKind kind) {
  switch (kind) {
    case RefKind::Text: return "text";
    case RefKind::ImageUri: return "image-uri";
    case RefKind::AudioUri: return "audio-uri";
    case RefKind::VideoUri: return "video-uri";
    case RefKind::SubtaskOutput: return "subtask-output";
  }
  return "text";
}

RefKind ref_kind_from_string(const std::string& s) {
  if (s == "text") return RefKind::Text;
  if (s == "image-uri") return RefKind::ImageUri;
  if (s == "audio-uri") return RefKind::AudioUri;
  if (s == "video-uri") return RefKind::VideoUri;
  if (s == "subtask-output") return RefKind::SubtaskOutput;
  throw Error(ErrorCode::SchemaViolation, fmt::format("unknown resource kind '{}'", s));
}

const char* to_string(ResultStatus status) {
  switch (status) {
    case ResultStatus::Ok: return "ok";
    case ResultStatus::Failed: return "failed";
    case ResultStatus::Timeout: return "timeout";
  }
  return "failed";
}

ResultStatus result_status_from_string(const std::string& s) {
  if (s == "ok") return ResultStatus::Ok;
  if (s == "failed") return ResultStatus::Failed;
  if (s == "timeout") return ResultStatus::Timeout;
  throw Error(ErrorCode::SchemaViolation, fmt::format("unknown result status '{}'", s));
}

const char* to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::LlmArbitration: return "llm-arbitration";
    case SelectionMethod::MedoidFallback: return "medoid-fallback";
    case SelectionMethod::Singleton: return "singleton";
  }
  return "singleton";
}

SelectionMethod selection_method_from_string(const std::string& s) {
  if (s == "llm-arbitration") return SelectionMethod::LlmArbitration;
  if (s == "medoid-fallback") return SelectionMethod::MedoidFallback;
  if (s == "singleton") return SelectionMethod::Singleton;
  throw Error(ErrorCode::SchemaViolation, fmt::format("unknown selection method '{}'", s));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ValidationVerdict validate_plan(const TaskPlan& plan, const std::set<std::string>& vocabulary) {
  ValidationVerdict verdict;
  auto add = [&](int id, std::string reason) {
    verdict.violations.push_back({id, std::move(reason)});
  };

  const int n = static_cast<int>(plan.subtasks.size());

  // Ids must be dense 0..n-1, in position.
  std::set<int> ids;
  for (int i = 0; i < n; ++i) {
    const Subtask& s = plan.subtasks[static_cast<std::size_t>(i)];
    if (!ids.insert(s.id).second) {
      add(s.id, fmt::format("duplicate subtask id {}", s.id));
    }
    if (s.id != i) {
      add(s.id, fmt::format("subtask id {} at position {}; ids must be dense 0..n-1", s.id, i));
    }
  }

  for (const Subtask& s : plan.subtasks) {
    if (s.deps.count(s.id) != 0) {
      add(s.id, fmt::format("self-dependency at {}", s.id));
    }
    for (int d : s.deps) {
      if (d != s.id && ids.count(d) == 0) {
        add(s.id, fmt::format("dependency on unknown subtask {}", d));
      }
    }
    if (!vocabulary.empty() && vocabulary.count(s.task_type) == 0) {
      add(s.id, fmt::format("task type '{}' not in vocabulary", s.task_type));
    }
    for (const auto& [name, ref] : s.args) {
      if (ref.kind == RefKind::SubtaskOutput) {
        if (!ref.producer.has_value()) {
          add(s.id, fmt::format("arg '{}' is a subtask-output without a producer", name));
        } else if (ids.count(*ref.producer) == 0) {
          add(s.id, fmt::format("arg '{}' references unknown producer {}", name, *ref.producer));
        } else if (s.deps.count(*ref.producer) == 0) {
          add(s.id, fmt::format("arg '{}' producer {} missing from deps", name, *ref.producer));
        }
      } else if (ref.producer.has_value()) {
        add(s.id, fmt::format("arg '{}' carries a producer but is not a subtask-output", name));
      }
    }
  }

  // Cycle detection over the dependency edges (dep -> subtask).
  std::map<int, int> state;  // 0 unvisited, 1 visiting, 2 done
  std::map<int, std::set<int>> deps_of;
  for (const Subtask& s : plan.subtasks) deps_of[s.id] = s.deps;

  bool cyclic = false;
  std::function<void(int)> visit = [&](int id) {
    if (cyclic) return;
    int& st = state[id];
    if (st == 1) {
      cyclic = true;
      return;
    }
    if (st == 2) return;
    st = 1;
    auto it = deps_of.find(id);
    if (it != deps_of.end()) {
      for (int d : it->second) {
        if (deps_of.count(d) != 0 && d != id) visit(d);
      }
    }
    state[id] = 2;
  };
  for (const Subtask& s : plan.subtasks) {
    if (state[s.id] == 0) visit(s.id);
    if (cyclic) break;
  }
  if (cyclic) add(-1, "cycle detected");

  return verdict;
}

std::vector<std::vector<int>> topological_order(const TaskPlan& plan) {
  const int n = static_cast<int>(plan.subtasks.size());
  std::map<int, std::set<int>> deps_of;
  for (const Subtask& s : plan.subtasks) deps_of[s.id] = s.deps;

  // Layer = longest dependency depth; a Kahn pass peels one layer per round.
  std::map<int, int> remaining;
  std::map<int, std::vector<int>> dependents;
  for (const auto& [id, deps] : deps_of) {
    remaining[id] = static_cast<int>(deps.size());
    for (int d : deps) dependents[d].push_back(id);
  }

  std::vector<int> ready;
  for (const auto& [id, count] : remaining) {
    if (count == 0) ready.push_back(id);
  }

  std::vector<std::vector<int>> layers;
  int placed = 0;
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end());
    layers.push_back(ready);
    placed += static_cast<int>(ready.size());
    std::vector<int> next;
    for (int id : ready) {
      for (int dep : dependents[id]) {
        if (--remaining[dep] == 0) next.push_back(dep);
      }
    }
    ready = std::move(next);
  }

  if (placed != n) {
    throw Error(ErrorCode::Precondition, "cycle detected; plan was not validated");
  }
  return layers;
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, fmt::format("{}: {}", path.empty() ? "/" : path, what));
}

const Json& require(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(path + "/" + key, "missing required field");
  return *it;
}

std::string require_string(const Json& j, const char* key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_string()) schema_error(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

int require_int(const Json& j, const char* key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_number_integer()) schema_error(path + "/" + key, "expected an integer");
  return v.get<int>();
}

}  // namespace

Json to_json(const ResourceRef& ref) {
  Json j{{"kind", to_string(ref.kind)}, {"value", ref.value}};
  if (ref.producer.has_value()) j["producer"] = *ref.producer;
  return j;
}

ResourceRef resource_ref_from_json(const Json& j, const std::string& path) {
  ResourceRef ref;
  const std::string kind = require_string(j, "kind", path);
  try {
    ref.kind = ref_kind_from_string(kind);
  } catch (const Error&) {
    schema_error(path + "/kind", fmt::format("unknown resource kind '{}'", kind));
  }
  ref.value = require_string(j, "value", path);
  if (j.contains("producer") && !j["producer"].is_null()) {
    if (!j["producer"].is_number_integer()) schema_error(path + "/producer", "expected an integer");
    ref.producer = j["producer"].get<int>();
  }
  if (ref.kind == RefKind::SubtaskOutput && !ref.producer.has_value()) {
    schema_error(path + "/producer", "required for subtask-output refs");
  }
  return ref;
}

Json to_json(const Subtask& subtask) {
  Json args = Json::object();
  for (const auto& [name, ref] : subtask.args) args[name] = to_json(ref);
  return Json{{"id", subtask.id},
              {"task_type", subtask.task_type},
              {"args", args},
              {"deps", subtask.deps}};
}

Subtask subtask_from_json(const Json& j, const std::string& path) {
  Subtask s;
  s.id = require_int(j, "id", path);
  if (s.id < 0) schema_error(path + "/id", "must be nonnegative");
  s.task_type = require_string(j, "task_type", path);
  if (j.contains("args") && !j["args"].is_null()) {
    if (!j["args"].is_object()) schema_error(path + "/args", "expected an object");
    for (const auto& [name, value] : j["args"].items()) {
      s.args[name] = resource_ref_from_json(value, path + "/args/" + name);
    }
  }
  if (j.contains("deps") && !j["deps"].is_null()) {
    if (!j["deps"].is_array()) schema_error(path + "/deps", "expected an array");
    for (std::size_t i = 0; i < j["deps"].size(); ++i) {
      const Json& d = j["deps"][i];
      if (!d.is_number_integer())
        schema_error(fmt::format("{}/deps/{}", path, i), "expected an integer");
      s.deps.insert(d.get<int>());
    }
  }
  return s;
}

Json to_json(const TaskPlan& plan) {
  Json subtasks = Json::array();
  for (const Subtask& s : plan.subtasks) subtasks.push_back(to_json(s));
  return Json{{"request_id", plan.request_id}, {"subtasks", subtasks}};
}

TaskPlan plan_from_json(const Json& j) {
  if (!j.is_object()) schema_error("", "expected a plan object");
  TaskPlan plan;
  if (j.contains("request_id")) {
    if (!j["request_id"].is_string()) schema_error("/request_id", "expected a string");
    plan.request_id = j["request_id"].get<std::string>();
  }
  const Json& subtasks = require(j, "subtasks", "");
  if (!subtasks.is_array()) schema_error("/subtasks", "expected an array");
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    plan.subtasks.push_back(subtask_from_json(subtasks[i], fmt::format("/subtasks/{}", i)));
  }
  return plan;
}

Json to_json(const UserRequest& request) {
  Json attachments = Json::array();
  for (const ResourceRef& ref : request.attachments) attachments.push_back(to_json(ref));
  return Json{{"id", request.id}, {"text", request.text}, {"attachments", attachments}};
}

UserRequest user_request_from_json(const Json& j) {
  UserRequest r;
  r.id = require_string(j, "id", "");
  r.text = require_string(j, "text", "");
  if (j.contains("attachments")) {
    if (!j["attachments"].is_array()) schema_error("/attachments", "expected an array");
    for (std::size_t i = 0; i < j["attachments"].size(); ++i) {
      r.attachments.push_back(
          resource_ref_from_json(j["attachments"][i], fmt::format("/attachments/{}", i)));
    }
  }
  if (r.id.empty()) schema_error("/id", "must be nonempty");
  if (r.text.empty()) schema_error("/text", "must be nonempty");
  return r;
}

Json to_json(const ModelDescriptor& model) {
  return Json{{"model_id", model.model_id},
              {"task_type", model.task_type},
              {"description", model.description},
              {"metrics",
               {{"downloads", model.downloads},
                {"likes", model.likes},
                {"trending_rank", model.trending_rank}}},
              {"endpoint", model.endpoint}};
}

ModelDescriptor model_descriptor_from_json(const Json& j, const std::string& path) {
  ModelDescriptor m;
  m.model_id = require_string(j, "model_id", path);
  if (m.model_id.empty()) schema_error(path + "/model_id", "must be nonempty");
  m.task_type = require_string(j, "task_type", path);
  m.description = j.value("description", std::string());
  m.endpoint = j.value("endpoint", std::string());
  if (j.contains("metrics")) {
    const Json& metrics = j["metrics"];
    if (!metrics.is_object()) schema_error(path + "/metrics", "expected an object");
    m.downloads = metrics.value("downloads", 0LL);
    m.likes = metrics.value("likes", 0LL);
    m.trending_rank = metrics.value("trending_rank", 0);
  }
  return m;
}

Json to_json(const CandidateResult& result) {
  Json j{{"subtask_id", result.subtask_id},
         {"model_id", result.model_id},
         {"canonical_text", result.canonical_text},
         {"structured", result.structured},
         {"latency_ms", result.latency_ms},
         {"status", to_string(result.status)}};
  if (!result.failure_cause.empty()) j["failure_cause"] = result.failure_cause;
  return j;
}

CandidateResult candidate_result_from_json(const Json& j) {
  CandidateResult r;
  r.subtask_id = require_int(j, "subtask_id", "");
  r.model_id = require_string(j, "model_id", "");
  r.canonical_text = require_string(j, "canonical_text", "");
  if (j.contains("structured")) r.structured = j["structured"];
  r.latency_ms = j.value("latency_ms", 0.0);
  r.status = result_status_from_string(require_string(j, "status", ""));
  r.failure_cause = j.value("failure_cause", std::string());
  return r;
}

Json to_json(const SelectionDecision& decision) {
  return Json{{"subtask_id", decision.subtask_id},
              {"similarity", decision.similarity},
              {"chosen_index", decision.chosen_index},
              {"method", to_string(decision.method)},
              {"rationale", decision.rationale}};
}

SelectionDecision selection_decision_from_json(const Json& j) {
  SelectionDecision d;
  d.subtask_id = require_int(j, "subtask_id", "");
  const Json& sim = require(j, "similarity", "");
  if (!sim.is_array()) schema_error("/similarity", "expected an array");
  for (const auto& row : sim) {
    d.similarity.push_back(row.get<std::vector<double>>());
  }
  d.chosen_index = require_int(j, "chosen_index", "");
  d.method = selection_method_from_string(require_string(j, "method", ""));
  d.rationale = j.value("rationale", std::string());
  return d;
}

Json to_json(const FinalResponse& response) {
  Json rows = Json::array();
  for (const auto& row : response.per_subtask) {
    rows.push_back(Json{{"subtask_id", row.subtask_id},
                        {"model_id", row.model_id},
                        {"canonical_text", row.canonical_text},
                        {"structured", row.structured}});
  }
  return Json{{"request_id", response.request_id},
              {"summary_text", response.summary_text},
              {"degraded", response.degraded},
              {"per_subtask", rows},
              {"failed_subtasks", response.failed_subtasks}};
}

FinalResponse final_response_from_json(const Json& j) {
  FinalResponse r;
  r.request_id = require_string(j, "request_id", "");
  r.summary_text = require_string(j, "summary_text", "");
  r.degraded = j.value("degraded", false);
  const Json& rows = require(j, "per_subtask", "");
  if (!rows.is_array()) schema_error("/per_subtask", "expected an array");
  for (const auto& row : rows) {
    FinalResponse::SubtaskRow out;
    out.subtask_id = require_int(row, "subtask_id", "/per_subtask");
    out.model_id = require_string(row, "model_id", "/per_subtask");
    out.canonical_text = require_string(row, "canonical_text", "/per_subtask");
    if (row.contains("structured")) out.structured = row["structured"];
    r.per_subtask.push_back(std::move(out));
  }
  if (j.contains("failed_subtasks")) {
    r.failed_subtasks = j["failed_subtasks"].get<std::vector<int>>();
  }
  return r;
}

std::set<std::string> vocabulary_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaViolation, "vocabulary must be a JSON array");
  std::set<std::string> vocab;
  for (const auto& entry : j) {
    if (!entry.is_string())
      throw Error(ErrorCode::SchemaViolation, "vocabulary entries must be strings");
    vocab.insert(entry.get<std::string>());
  }
  return vocab;
}

}  // namespace esp
