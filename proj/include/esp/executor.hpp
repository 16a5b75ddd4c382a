#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "esp/core.hpp"

namespace esp {

/// A fully-resolved model invocation: every subtask-output reference has
/// been substituted with the producer's selected result.
struct InvocationSpec {
  int subtask_id = 0;
  ModelDescriptor model;
  std::map<std::string, std::string> args;
  int timeout_ms = 60000;
};

/// Wire contract: HTTP POST <endpoint> {task_type, args} -> {output: ...}.
/// Implementations never throw; failures are encoded in the result status.
class ModelInvoker {
 public:
  virtual ~ModelInvoker() = default;
  virtual CandidateResult invoke(const std::string& task_type, const InvocationSpec& spec) = 0;
};

class HttpModelInvoker final : public ModelInvoker {
 public:
  CandidateResult invoke(const std::string& task_type, const InvocationSpec& spec) override;
};

/// Substitutes subtask-output refs with the producers' SELECTED outputs;
/// literals pass through. Throws UnresolvedDependency when an upstream
/// output is missing.
std::map<std::string, std::string> resolve_args(const Subtask& subtask,
                                                const std::map<int, std::string>& upstream);

struct ExecLimits {
  int parallelism = 4;  // global bound on in-flight model invocations
  int invocation_timeout_ms = 60000;
};

struct CandidateSet {
  std::vector<CandidateResult> results;  // candidate order preserved

  bool all_failed() const;
  std::vector<const CandidateResult*> ok_results() const;
  std::vector<std::string> failure_causes() const;
};

/// Invokes every candidate concurrently with the same resolved args.
CandidateSet run_subtask(const Subtask& subtask, const std::vector<ModelDescriptor>& candidates,
                         const std::map<std::string, std::string>& resolved_args,
                         ModelInvoker& invoker, const ExecLimits& limits);

enum class SubtaskState { Ok, Failed, Skipped };

const char* to_string(SubtaskState state);

struct InvocationRecord {
  std::string model_id;
  double start_ms = 0;
  double end_ms = 0;
  ResultStatus status = ResultStatus::Ok;
  std::string resolved_args_json;  // identical across one subtask's candidates
};

struct SubtaskTrace {
  int subtask_id = 0;
  int layer = 0;
  SubtaskState state = SubtaskState::Ok;
  std::vector<InvocationRecord> invocations;
  std::vector<CandidateResult> candidates;
  double integration_start_ms = -1;
  double integration_end_ms = -1;
  std::vector<std::string> failure_causes;
};

struct ExecutionTrace {
  std::vector<SubtaskTrace> subtasks;  // ordered by subtask id
  double total_ms = 0;
};

Json to_json(const ExecutionTrace& trace);

struct RunResult {
  ExecutionTrace trace;
  std::map<int, SelectionDecision> decisions;  // one per Ok subtask
  std::map<int, SubtaskState> states;

  /// The selected candidate for an Ok subtask (index resolves against the
  /// ok-candidates list the integrator saw).
  const CandidateResult* chosen(int subtask_id) const;
};

using CandidateSelector = std::function<std::vector<ModelDescriptor>(const Subtask&)>;
using IntegratorHook =
    std::function<SelectionDecision(const Subtask&, const std::vector<CandidateResult>&)>;

/// Executes the plan in topological layers. A subtask starts only after all
/// of its dependencies have a SelectionDecision; independent subtasks in a
/// layer run concurrently; integration runs per subtask as soon as its
/// candidates complete. A failed subtask marks all transitive dependents
/// skipped, and the trace is still returned.
RunResult run_plan(const TaskPlan& plan, const CandidateSelector& selector,
                   const IntegratorHook& integrator, ModelInvoker& invoker,
                   const ExecLimits& limits);

}  // namespace esp
