#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esp/errors.hpp"

namespace esp {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class RefKind { Text, ImageUri, AudioUri, VideoUri, SubtaskOutput };

const char* to_string(RefKind kind);
RefKind ref_kind_from_string(const std::string& s);  // throws SchemaViolation

/// A value flowing into a subtask argument: a literal, a media URI, or a
/// reference to another subtask's selected output.
struct ResourceRef {
  RefKind kind = RefKind::Text;
  std::string value;
  std::optional<int> producer;  // set iff kind == SubtaskOutput

  bool operator==(const ResourceRef&) const = default;
};

struct UserRequest {
  std::string id;
  std::string text;
  std::vector<ResourceRef> attachments;

  bool operator==(const UserRequest&) const = default;
};

/// One typed unit of work in a plan. Ids are dense 0..n-1 within a plan so
/// dependency references stay unambiguous in model output.
struct Subtask {
  int id = 0;
  std::string task_type;
  std::map<std::string, ResourceRef> args;
  std::set<int> deps;

  bool operator==(const Subtask&) const = default;
};

struct TaskPlan {
  std::string request_id;
  std::vector<Subtask> subtasks;

  bool operator==(const TaskPlan&) const = default;
};

struct ModelDescriptor {
  std::string model_id;
  std::string task_type;
  std::string description;
  long long downloads = 0;
  long long likes = 0;
  int trending_rank = 0;  // 1-based; 0 when unranked
  std::string endpoint;

  bool operator==(const ModelDescriptor&) const = default;
};

enum class ResultStatus { Ok, Failed, Timeout };

const char* to_string(ResultStatus status);
ResultStatus result_status_from_string(const std::string& s);

/// One model's output for one subtask.
struct CandidateResult {
  int subtask_id = 0;
  std::string model_id;
  std::string canonical_text;
  Json structured;
  double latency_ms = 0.0;
  ResultStatus status = ResultStatus::Ok;
  std::string failure_cause;  // set for failed/timeout

  bool ok() const { return status == ResultStatus::Ok; }
  bool operator==(const CandidateResult&) const = default;
};

enum class SelectionMethod { LlmArbitration, MedoidFallback, Singleton };

const char* to_string(SelectionMethod method);
SelectionMethod selection_method_from_string(const std::string& s);

/// Outcome of picking the optimal candidate for a subtask: the similarity
/// matrix shown to the arbiter, the chosen index into the ok-candidates
/// list, and how the choice was made.
struct SelectionDecision {
  int subtask_id = 0;
  std::vector<std::vector<double>> similarity;
  int chosen_index = 0;
  SelectionMethod method = SelectionMethod::Singleton;
  std::string rationale;

  bool operator==(const SelectionDecision&) const = default;
};

struct FinalResponse {
  struct SubtaskRow {
    int subtask_id = 0;
    std::string model_id;
    std::string canonical_text;
    Json structured;

    bool operator==(const SubtaskRow&) const = default;
  };

  std::string request_id;
  std::string summary_text;
  bool degraded = false;                // true when the summary LLM was unreachable
  std::vector<SubtaskRow> per_subtask;  // succeeded subtasks only
  std::vector<int> failed_subtasks;     // failed or skipped, never dropped silently

  bool operator==(const FinalResponse&) const = default;
};

// ---------------------------------------------------------------------------
// Plan validation and ordering
// ---------------------------------------------------------------------------

struct Violation {
  int subtask_id = -1;  // -1 for plan-level violations
  std::string reason;

  bool operator==(const Violation&) const = default;
};

struct ValidationVerdict {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks every TaskPlan/Subtask invariant; violations are data, not errors.
/// An empty vocabulary disables the task-type check (used where only the
/// structure matters).
ValidationVerdict validate_plan(const TaskPlan& plan, const std::set<std::string>& vocabulary);

/// Layered (Kahn-style) topological order: layer index = longest-path depth,
/// ids ascending within a layer. Throws on a cycle, which is unreachable for
/// a validated plan.
std::vector<std::vector<int>> topological_order(const TaskPlan& plan);

// ---------------------------------------------------------------------------
// Canonical JSON wire format
// ---------------------------------------------------------------------------
// {"request_id", "subtasks":[{"id","task_type","args":{name:{"kind","value",
//  "producer"?}},"deps":[...]}]}

Json to_json(const ResourceRef& ref);
Json to_json(const Subtask& subtask);
Json to_json(const TaskPlan& plan);
Json to_json(const UserRequest& request);
Json to_json(const ModelDescriptor& model);
Json to_json(const CandidateResult& result);
Json to_json(const SelectionDecision& decision);
Json to_json(const FinalResponse& response);

// All from_json parsers throw Error(SchemaViolation) with a /field/path in
// the message on malformed input.
ResourceRef resource_ref_from_json(const Json& j, const std::string& path = "");
Subtask subtask_from_json(const Json& j, const std::string& path = "");
TaskPlan plan_from_json(const Json& j);
UserRequest user_request_from_json(const Json& j);
ModelDescriptor model_descriptor_from_json(const Json& j, const std::string& path = "");
CandidateResult candidate_result_from_json(const Json& j);
SelectionDecision selection_decision_from_json(const Json& j);
FinalResponse final_response_from_json(const Json& j);

/// Loads the task-type vocabulary shipped as configuration data (a JSON
/// array of strings).
std::set<std::string> vocabulary_from_json(const Json& j);

}  // namespace esp
