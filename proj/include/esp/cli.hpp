#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace esp::cli {

struct GlobalFlags {
  std::string config_path;
  bool mock = false;
  std::uint64_t seed = 0;
  std::string out;          // run: response file; eval: report directory
  std::string trace;        // run only: trace + decisions JSON
  bool planner_only = false;  // eval only
};

// Exit codes: 0 success, 1 fatal, 2 partial degradation (failed subtasks or
// unevaluable records).
int cmd_run(const std::string& request_text_or_file, const GlobalFlags& flags, std::ostream& out,
            std::ostream& err);

int cmd_eval(const std::string& dataset_path, const GlobalFlags& flags, std::ostream& out,
             std::ostream& err);

int cmd_sync(const std::string& hub_endpoint, const std::vector<std::string>& task_types,
             const std::string& snapshot_path, const GlobalFlags& flags, std::ostream& out,
             std::ostream& err);

}  // namespace esp::cli
