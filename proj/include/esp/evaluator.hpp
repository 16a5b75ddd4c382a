#pragma once

#include <optional>
#include <string>
#include <vector>

#include "esp/core.hpp"
#include "esp/llm_gateway.hpp"

namespace esp {

enum class TaskCategory { Single, Sequential, Graph };

const char* to_string(TaskCategory category);
TaskCategory task_category_from_string(const std::string& s);

/// One benchmark row: the request, its category, the gold plan, and (after
/// evaluation) the predicted plan. Category must match the gold-plan shape:
/// single = one node, sequential = a path, graph = any DAG.
struct EvalRecord {
  std::string id;
  std::string text;
  TaskCategory category = TaskCategory::Single;
  TaskPlan gold_plan;
  std::optional<TaskPlan> predicted_plan;
};

struct DatasetDiagnostic {
  int line = 0;  // 1-based
  std::string message;
};

struct Dataset {
  std::vector<EvalRecord> records;
  std::vector<DatasetDiagnostic> diagnostics;  // malformed lines, not fatal
};

/// Line-delimited JSON: {"id","text","category","gold":{plan schema}}.
Dataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Precision/recall/F1 over the multisets of task-type names.
Prf task_set_prf(const TaskPlan& pred, const TaskPlan& gold);

/// 1 iff pred has exactly one subtask whose type equals the gold type.
int single_accuracy(const TaskPlan& pred, const TaskPlan& gold);

/// Unit-cost Levenshtein distance over symbol sequences.
int levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Levenshtein / max(|pred|, |gold|); gold must be nonempty.
double normalized_edit_distance(const std::vector<std::string>& pred_seq,
                                const std::vector<std::string>& gold_seq);

/// Task-type sequence in layered topological order, ids ascending within a
/// layer (unique for path-shaped plans).
std::vector<std::string> plan_type_sequence(const TaskPlan& plan);

/// Plan-quality score in [0,100] from a judge profile. The judge must
/// answer "SCORE: <integer>"; one re-ask, then the record is excluded from
/// the aggregate via nullopt.
std::optional<int> g4s(const TaskPlan& pred, const TaskPlan& gold, const std::string& request,
                       LlmGateway& judge, const std::string& template_text);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct RecordMetrics {
  TaskCategory category = TaskCategory::Single;
  Prf prf;
  double accuracy = 0;          // single only
  double edit_distance = 0;     // sequential only
  std::optional<int> judge_score;  // graph only; nullopt = judge failed
  bool parse_failed = false;    // prediction missing, scored as empty plan
};

struct CategoryAggregate {
  int count = 0;
  // Percentages are x100 and rounded half-up to 2 decimals, mirroring the
  // usual table formatting; edit distance stays in [0,1].
  std::optional<double> acc;
  std::optional<double> ed;
  std::optional<double> g4s;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct MetricReport {
  std::optional<CategoryAggregate> single;
  std::optional<CategoryAggregate> sequential;
  std::optional<CategoryAggregate> graph;
  int judge_failures = 0;
  int parse_failures = 0;
};

RecordMetrics score_record(const EvalRecord& record, LlmGateway* judge,
                           const std::string& judge_template);

MetricReport aggregate(const std::vector<RecordMetrics>& records);

Json report_to_json(const MetricReport& report);
std::string report_to_table(const MetricReport& report);

/// Percent formatting helper: mean in [0,1] -> percentage rounded half-up
/// to 2 decimals.
double to_percent(double rate);

}  // namespace esp
