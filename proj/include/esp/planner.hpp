#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "esp/core.hpp"
#include "esp/llm_gateway.hpp"

namespace esp {

struct PlannerConfig {
  // Must contain the {request}, {vocabulary}, and {demonstrations} slots.
  std::string prompt_template;
  std::vector<std::pair<std::string, std::string>> demonstrations;  // (request, plan JSON)
  int max_repair_rounds = 2;
};

struct ParseDiagnostics {
  ErrorCode code = ErrorCode::NoJsonFound;
  std::string message;
  std::size_t offset = 0;  // character offset of the JSON candidate, 0 if none
  std::string path;        // JSON pointer for schema violations
};

struct PlanParseOutcome {
  std::optional<TaskPlan> plan;
  std::optional<ParseDiagnostics> diagnostics;

  bool ok() const { return plan.has_value(); }
};

/// Tolerant extraction: finds the first balanced JSON object in the text
/// (models wrap JSON in prose and code fences), then strict-parses it
/// against the plan schema.
PlanParseOutcome parse_plan_json(const std::string& text);

struct PlanResult {
  TaskPlan plan;
  int repair_rounds_used = 0;
};

/// Turns a request into a validated plan. Invalid model output triggers up
/// to max_repair_rounds repair prompts carrying the previous output and the
/// violation list; exhaustion throws ParseFailure. An empty plan (the
/// vocabulary cannot fulfil the request) throws ParseFailure with an
/// empty-plan diagnostic rather than inventing a subtask.
PlanResult plan(const UserRequest& request, const PlannerConfig& cfg, LlmGateway& llm,
                const std::set<std::string>& vocabulary);

std::string render_planner_prompt(const PlannerConfig& cfg, const UserRequest& request,
                                  const std::set<std::string>& vocabulary);

}  // namespace esp
