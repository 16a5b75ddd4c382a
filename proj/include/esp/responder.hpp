#pragma once

#include <string>

#include "esp/core.hpp"
#include "esp/executor.hpp"
#include "esp/llm_gateway.hpp"

namespace esp {

/// Template slots: {request}, {results}, {failed}.
struct ResponderTemplate {
  std::string template_text;
};

/// Composes the final answer: the summary prompt carries the plan and every
/// selected result in structured form, failed/skipped subtasks included.
/// The LLM writes prose; the structured payloads are echoed verbatim. A
/// gateway outage degrades to the structured table under a templated
/// header instead of aborting.
FinalResponse respond(const UserRequest& request, const TaskPlan& plan, const RunResult& run,
                      LlmGateway* llm, const ResponderTemplate& tmpl);

std::string render_responder_prompt(const ResponderTemplate& tmpl, const UserRequest& request,
                                    const TaskPlan& plan, const RunResult& run);

}  // namespace esp
