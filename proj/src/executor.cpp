#include "esp/executor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <future>
#include <mutex>

#include "esp/integrator.hpp"
#include "http_support.hpp"

namespace esp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Counting semaphore bounding in-flight invocations.
class Gate {
 public:
  explicit Gate(int slots) : slots_(slots) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return slots_ > 0; });
    --slots_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

struct GateGuard {
  explicit GateGuard(Gate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateGuard() { gate_.release(); }
  Gate& gate_;
};

}  // namespace

const char* to_string(SubtaskState state) {
  switch (state) {
    case SubtaskState::Ok: return "ok";
    case SubtaskState::Failed: return "failed";
    case SubtaskState::Skipped: return "skipped";
  }
  return "failed";
}

// ---------------------------------------------------------------------------
// HTTP invoker
// ---------------------------------------------------------------------------

CandidateResult HttpModelInvoker::invoke(const std::string& task_type,
                                         const InvocationSpec& spec) {
  CandidateResult result;
  result.subtask_id = spec.subtask_id;
  result.model_id = spec.model.model_id;

  const auto started = Clock::now();
  auto fail = [&](ResultStatus status, std::string cause) {
    result.status = status;
    result.failure_cause = std::move(cause);
    result.latency_ms = ms_since(started);
    return result;
  };

  try {
    auto [base, path] = detail::split_url(spec.model.endpoint);
    auto client = detail::make_client(base, spec.timeout_ms);
    Json body{{"task_type", task_type}, {"args", spec.args}};
    auto reply = client.Post(path, body.dump(), "application/json");
    if (!reply) {
      const auto elapsed = ms_since(started);
      if (reply.error() == httplib::Error::ConnectionTimeout ||
          (reply.error() == httplib::Error::Read && elapsed >= spec.timeout_ms)) {
        return fail(ResultStatus::Timeout,
                    fmt::format("no reply within {} ms", spec.timeout_ms));
      }
      return fail(ResultStatus::Failed, httplib::to_string(reply.error()));
    }
    if (reply->status != 200) {
      return fail(ResultStatus::Failed, fmt::format("http status {}", reply->status));
    }
    Json parsed = Json::parse(reply->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("output")) {
      return fail(ResultStatus::Failed, "reply missing 'output'");
    }
    result.structured = parsed["output"];
    result.canonical_text = canonical_text(result.structured);
    if (result.canonical_text.empty()) {
      return fail(ResultStatus::Failed, "empty output");
    }
    result.latency_ms = ms_since(started);
    result.status = ResultStatus::Ok;
    return result;
  } catch (const std::exception& e) {
    return fail(ResultStatus::Failed, e.what());
  }
}

// ---------------------------------------------------------------------------
// Argument resolution
// ---------------------------------------------------------------------------

std::map<std::string, std::string> resolve_args(const Subtask& subtask,
                                                const std::map<int, std::string>& upstream) {
  std::map<std::string, std::string> resolved;
  for (const auto& [name, ref] : subtask.args) {
    if (ref.kind == RefKind::SubtaskOutput) {
      if (!ref.producer.has_value()) {
        throw Error(ErrorCode::UnresolvedDependency,
                    fmt::format("arg '{}' has no producer", name));
      }
      auto it = upstream.find(*ref.producer);
      if (it == upstream.end()) {
        throw Error(ErrorCode::UnresolvedDependency,
                    fmt::format("arg '{}' needs output of subtask {}, which is missing", name,
                                *ref.producer));
      }
      resolved[name] = it->second;
    } else {
      resolved[name] = ref.value;
    }
  }
  return resolved;
}

// ---------------------------------------------------------------------------
// Subtask execution
// ---------------------------------------------------------------------------

bool CandidateSet::all_failed() const {
  return std::none_of(results.begin(), results.end(),
                      [](const CandidateResult& r) { return r.ok(); });
}

std::vector<const CandidateResult*> CandidateSet::ok_results() const {
  std::vector<const CandidateResult*> out;
  for (const CandidateResult& r : results) {
    if (r.ok()) out.push_back(&r);
  }
  return out;
}

std::vector<std::string> CandidateSet::failure_causes() const {
  std::vector<std::string> causes;
  for (const CandidateResult& r : results) {
    if (!r.ok()) causes.push_back(fmt::format("{}: {}", r.model_id, r.failure_cause));
  }
  return causes;
}

CandidateSet run_subtask(const Subtask& subtask, const std::vector<ModelDescriptor>& candidates,
                         const std::map<std::string, std::string>& resolved_args,
                         ModelInvoker& invoker, const ExecLimits& limits) {
  if (candidates.empty()) {
    throw Error(ErrorCode::Precondition, "run_subtask with no candidates");
  }
  std::vector<std::future<CandidateResult>> futures;
  futures.reserve(candidates.size());
  for (const ModelDescriptor& model : candidates) {
    InvocationSpec spec{subtask.id, model, resolved_args, limits.invocation_timeout_ms};
    futures.push_back(std::async(std::launch::async, [&invoker, &subtask, spec] {
      return invoker.invoke(subtask.task_type, spec);
    }));
  }
  CandidateSet set;
  for (auto& f : futures) set.results.push_back(f.get());
  return set;
}

// ---------------------------------------------------------------------------
// Plan execution
// ---------------------------------------------------------------------------

namespace {

// Everything the workers share, guarded by one mutex.
struct Collector {
  std::mutex mu;
  std::map<int, std::string> upstream;  // subtask id -> chosen canonical text
  std::map<int, SelectionDecision> decisions;
  std::map<int, SubtaskState> states;
  std::map<int, SubtaskTrace> traces;
};

struct BoundedInvoker final : ModelInvoker {
  BoundedInvoker(ModelInvoker& inner, Gate& gate) : inner_(inner), gate_(gate) {}

  CandidateResult invoke(const std::string& task_type, const InvocationSpec& spec) override {
    GateGuard guard(gate_);
    return inner_.invoke(task_type, spec);
  }

  ModelInvoker& inner_;
  Gate& gate_;
};

}  // namespace

const CandidateResult* RunResult::chosen(int subtask_id) const {
  auto decision_it = decisions.find(subtask_id);
  if (decision_it == decisions.end()) return nullptr;
  for (const SubtaskTrace& st : trace.subtasks) {
    if (st.subtask_id != subtask_id) continue;
    int ok_index = 0;
    for (const CandidateResult& c : st.candidates) {
      if (!c.ok()) continue;
      if (ok_index == decision_it->second.chosen_index) return &c;
      ++ok_index;
    }
  }
  return nullptr;
}

RunResult run_plan(const TaskPlan& plan, const CandidateSelector& selector,
                   const IntegratorHook& integrator, ModelInvoker& invoker,
                   const ExecLimits& limits) {
  const auto layers = topological_order(plan);
  const auto t0 = Clock::now();

  std::map<int, const Subtask*> by_id;
  for (const Subtask& s : plan.subtasks) by_id[s.id] = &s;

  Gate gate(std::max(1, limits.parallelism));
  BoundedInvoker bounded(invoker, gate);
  Collector collector;

  for (std::size_t layer_index = 0; layer_index < layers.size(); ++layer_index) {
    std::vector<std::future<void>> workers;
    for (int id : layers[layer_index]) {
      const Subtask& subtask = *by_id.at(id);

      // Readiness check: every dependency must carry a decision.
      bool runnable = true;
      {
        std::lock_guard lock(collector.mu);
        for (int dep : subtask.deps) {
          auto it = collector.states.find(dep);
          if (it == collector.states.end() || it->second != SubtaskState::Ok) {
            runnable = false;
            break;
          }
        }
        if (!runnable) {
          SubtaskTrace st;
          st.subtask_id = id;
          st.layer = static_cast<int>(layer_index);
          st.state = SubtaskState::Skipped;
          st.failure_causes = {"upstream dependency failed"};
          collector.states[id] = SubtaskState::Skipped;
          collector.traces[id] = std::move(st);
          continue;
        }
      }

      workers.push_back(std::async(std::launch::async, [&, id, layer_index] {
        const Subtask& task = *by_id.at(id);
        SubtaskTrace st;
        st.subtask_id = id;
        st.layer = static_cast<int>(layer_index);

        try {
          std::map<int, std::string> upstream;
          {
            std::lock_guard lock(collector.mu);
            upstream = collector.upstream;
          }
          const auto resolved = resolve_args(task, upstream);
          const std::string resolved_json = Json(resolved).dump();

          const auto candidates = selector(task);

          // Per-candidate invocation, concurrent, same args, bounded.
          std::vector<std::future<std::pair<InvocationRecord, CandidateResult>>> futures;
          for (const ModelDescriptor& model : candidates) {
            InvocationSpec spec{task.id, model, resolved, limits.invocation_timeout_ms};
            futures.push_back(std::async(
                std::launch::async, [&bounded, &task, spec, resolved_json, t0] {
                  InvocationRecord record;
                  record.model_id = spec.model.model_id;
                  record.resolved_args_json = resolved_json;
                  record.start_ms = ms_since(t0);
                  CandidateResult result = bounded.invoke(task.task_type, spec);
                  record.end_ms = ms_since(t0);
                  record.status = result.status;
                  return std::make_pair(std::move(record), std::move(result));
                }));
          }

          CandidateSet set;
          for (auto& f : futures) {
            auto [record, result] = f.get();
            st.invocations.push_back(std::move(record));
            set.results.push_back(std::move(result));
          }
          st.candidates = set.results;

          if (set.all_failed()) {
            st.state = SubtaskState::Failed;
            st.failure_causes = set.failure_causes();
          } else {
            std::vector<CandidateResult> ok;
            for (const CandidateResult& r : set.results) {
              if (r.ok()) ok.push_back(r);
            }
            st.integration_start_ms = ms_since(t0);
            SelectionDecision decision = integrator(task, ok);
            st.integration_end_ms = ms_since(t0);
            st.state = SubtaskState::Ok;

            std::lock_guard lock(collector.mu);
            collector.upstream[id] =
                ok[static_cast<std::size_t>(decision.chosen_index)].canonical_text;
            collector.decisions[id] = std::move(decision);
          }
        } catch (const std::exception& e) {
          st.state = SubtaskState::Failed;
          st.failure_causes.push_back(e.what());
        }

        std::lock_guard lock(collector.mu);
        collector.states[id] = st.state;
        collector.traces[id] = std::move(st);
      }));
    }
    for (auto& w : workers) w.get();
  }

  RunResult result;
  result.decisions = std::move(collector.decisions);
  result.states = std::move(collector.states);
  for (auto& [id, st] : collector.traces) {
    result.trace.subtasks.push_back(std::move(st));
  }
  result.trace.total_ms = ms_since(t0);
  return result;
}

Json to_json(const ExecutionTrace& trace) {
  Json subtasks = Json::array();
  for (const SubtaskTrace& st : trace.subtasks) {
    Json invocations = Json::array();
    for (const InvocationRecord& r : st.invocations) {
      invocations.push_back(Json{{"model_id", r.model_id},
                                 {"start_ms", r.start_ms},
                                 {"end_ms", r.end_ms},
                                 {"status", to_string(r.status)},
                                 {"resolved_args", r.resolved_args_json}});
    }
    Json candidates = Json::array();
    for (const CandidateResult& c : st.candidates) candidates.push_back(to_json(c));
    subtasks.push_back(Json{{"subtask_id", st.subtask_id},
                            {"layer", st.layer},
                            {"state", to_string(st.state)},
                            {"invocations", invocations},
                            {"candidates", candidates},
                            {"integration_start_ms", st.integration_start_ms},
                            {"integration_end_ms", st.integration_end_ms},
                            {"failure_causes", st.failure_causes}});
  }
  return Json{{"subtasks", subtasks}, {"total_ms", trace.total_ms}};
}

}  // namespace esp
