#include "esp/planner.hpp"

#include <fmt/format.h>

namespace esp {

namespace {

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos;
  while ((pos = text.find(slot)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
  }
  return text;
}

// Returns [start, end) of the first balanced {...} region, or nullopt.
// String literals and escapes are honored so braces inside values do not
// confuse the scan.
std::optional<std::pair<std::size_t, std::size_t>> find_object(const std::string& text,
                                                               std::size_t from) {
  auto start = text.find('{', from);
  while (start != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) return std::make_pair(start, i + 1);
      }
    }
    start = text.find('{', start + 1);
  }
  return std::nullopt;
}

}  // namespace

PlanParseOutcome parse_plan_json(const std::string& text) {
  PlanParseOutcome outcome;
  std::size_t from = 0;
  std::optional<ParseDiagnostics> first_schema_error;

  while (auto region = find_object(text, from)) {
    const auto [start, end] = *region;
    Json j = Json::parse(text.substr(start, end - start), nullptr, false);
    if (j.is_discarded()) {
      from = start + 1;  // balanced but not JSON; keep scanning
      continue;
    }
    try {
      outcome.plan = plan_from_json(j);
      outcome.diagnostics.reset();
      return outcome;
    } catch (const Error& e) {
      if (!first_schema_error) {
        ParseDiagnostics d;
        d.code = ErrorCode::SchemaViolation;
        d.message = e.what();
        d.offset = start;
        const std::string what = e.what();
        // Message format is "SchemaViolation: /path: reason".
        auto colon = what.find(": ");
        if (colon != std::string::npos) {
          auto rest = what.substr(colon + 2);
          auto path_end = rest.find(": ");
          d.path = path_end == std::string::npos ? rest : rest.substr(0, path_end);
        }
        first_schema_error = std::move(d);
      }
      from = start + 1;
    }
  }

  if (first_schema_error) {
    outcome.diagnostics = std::move(first_schema_error);
  } else {
    ParseDiagnostics d;
    d.code = ErrorCode::NoJsonFound;
    d.message = "no JSON object found in model output";
    outcome.diagnostics = std::move(d);
  }
  return outcome;
}

std::string render_planner_prompt(const PlannerConfig& cfg, const UserRequest& request,
                                  const std::set<std::string>& vocabulary) {
  std::string vocab_line;
  for (const std::string& t : vocabulary) {
    if (!vocab_line.empty()) vocab_line += ", ";
    vocab_line += t;
  }
  std::string demos;
  for (const auto& [req, plan_json] : cfg.demonstrations) {
    demos += fmt::format("Request: {}\nPlan: {}\n\n", req, plan_json);
  }
  std::string text = cfg.prompt_template;
  text = replace_slot(std::move(text), "{vocabulary}", vocab_line);
  text = replace_slot(std::move(text), "{demonstrations}", demos);
  text = replace_slot(std::move(text), "{request}", request.text);
  return text;
}

PlanResult plan(const UserRequest& request, const PlannerConfig& cfg, LlmGateway& llm,
                const std::set<std::string>& vocabulary) {
  if (request.id.empty() || request.text.empty()) {
    throw Error(ErrorCode::Precondition, "request id and text must be nonempty");
  }
  for (const char* slot : {"{request}", "{vocabulary}", "{demonstrations}"}) {
    if (cfg.prompt_template.find(slot) == std::string::npos) {
      throw Error(ErrorCode::ConfigError,
                  fmt::format("planner template is missing the {} slot", slot));
    }
  }

  std::vector<ChatMessage> messages{
      {Role::User, render_planner_prompt(cfg, request, vocabulary)}};

  std::string last_problem;
  for (int round = 0; round <= cfg.max_repair_rounds; ++round) {
    const std::string reply = llm.complete(messages);

    auto parsed = parse_plan_json(reply);
    std::vector<std::string> problems;
    std::optional<TaskPlan> candidate;
    if (!parsed.ok()) {
      problems.push_back(parsed.diagnostics->message);
    } else {
      candidate = std::move(parsed.plan);
      candidate->request_id = request.id;  // never trust the echo
      if (candidate->subtasks.empty()) {
        // The model itself declared the request unfulfillable; surface that
        // as a diagnostic instead of synthesizing a subtask.
        throw Error(ErrorCode::ParseFailure,
                    "empty plan: no task type in the vocabulary covers the request");
      }
      auto verdict = validate_plan(*candidate, vocabulary);
      for (const Violation& v : verdict.violations) {
        problems.push_back(fmt::format("subtask {}: {}", v.subtask_id, v.reason));
      }
    }

    if (problems.empty()) {
      return PlanResult{std::move(*candidate), round};
    }

    std::string joined;
    for (const std::string& p : problems) joined += "- " + p + "\n";
    last_problem = joined;

    if (round < cfg.max_repair_rounds) {
      messages.push_back({Role::Assistant, reply});
      messages.push_back(
          {Role::User,
           fmt::format("That plan is invalid:\n{}Emit a corrected plan as a single JSON "
                       "object with the same schema.",
                       joined)});
    }
  }

  throw Error(ErrorCode::ParseFailure,
              fmt::format("no valid plan after {} repair rounds:\n{}", cfg.max_repair_rounds,
                          last_problem));
}

}  // namespace esp
