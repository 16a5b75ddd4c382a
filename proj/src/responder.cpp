#include "esp/responder.hpp"

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

std::string results_section(const TaskPlan& plan, const RunResult& run) {
  std::string out;
  for (const Subtask& s : plan.subtasks) {
    const CandidateResult* chosen = run.chosen(s.id);
    if (chosen == nullptr) continue;
    out += fmt::format("subtask {} ({}) via {}: {}\n", s.id, s.task_type, chosen->model_id,
                       chosen->canonical_text);
  }
  return out;
}

std::string failed_section(const TaskPlan& plan, const RunResult& run) {
  std::string out;
  for (const Subtask& s : plan.subtasks) {
    auto it = run.states.find(s.id);
    if (it == run.states.end() || it->second == SubtaskState::Ok) continue;
    out += fmt::format("failed: {} ({}, {})\n", s.id, s.task_type, to_string(it->second));
  }
  return out.empty() ? "none\n" : out;
}

}  // namespace

std::string render_responder_prompt(const ResponderTemplate& tmpl, const UserRequest& request,
                                    const TaskPlan& plan, const RunResult& run) {
  std::string text = tmpl.template_text;
  text = replace_slot(std::move(text), "{request}", request.text);
  text = replace_slot(std::move(text), "{results}", results_section(plan, run));
  text = replace_slot(std::move(text), "{failed}", failed_section(plan, run));
  return text;
}

FinalResponse respond(const UserRequest& request, const TaskPlan& plan, const RunResult& run,
                      LlmGateway* llm, const ResponderTemplate& tmpl) {
  FinalResponse response;
  response.request_id = request.id;

  for (const Subtask& s : plan.subtasks) {
    const CandidateResult* chosen = run.chosen(s.id);
    if (chosen != nullptr) {
      response.per_subtask.push_back(
          {s.id, chosen->model_id, chosen->canonical_text, chosen->structured});
    } else {
      response.failed_subtasks.push_back(s.id);
    }
  }

  if (llm != nullptr) {
    try {
      response.summary_text =
          llm->complete({{Role::User, render_responder_prompt(tmpl, request, plan, run)}});
      return response;
    } catch (const Error&) {
      // fall through to the degraded form
    }
  }

  response.degraded = true;
  std::string table = results_section(plan, run);
  std::string failed = failed_section(plan, run);
  response.summary_text =
      fmt::format("Summary unavailable (language model unreachable). Structured results:\n"
                  "{}failed subtasks:\n{}",
                  table, failed);
  return response;
}

}  // namespace esp
