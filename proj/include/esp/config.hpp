#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "esp/executor.hpp"
#include "esp/integrator.hpp"
#include "esp/llm_gateway.hpp"
#include "esp/planner.hpp"
#include "esp/registry.hpp"
#include "esp/responder.hpp"

namespace esp {

/// One JSON document covering profiles, policy, timeouts, embedding mode,
/// and prompt file paths, so a run is reproducible from config + snapshot +
/// dataset alone. Relative paths resolve against the config file's
/// directory. Violations throw ConfigError naming the /field/path.
struct AppConfig {
  std::filesystem::path base_dir;

  std::set<std::string> vocabulary;
  PlannerConfig planner;
  ArbitrationPrompt arbitration;
  ResponderTemplate responder;
  std::string judge_template;

  SelectionPolicy policy;
  EmbeddingProvider embedding;
  ExecLimits limits;

  std::map<std::string, LlmProfile> profiles;
  std::string planner_profile;
  std::string arbiter_profile;
  std::string responder_profile;
  std::string judge_profile;

  std::string catalog_snapshot;   // resolved path; may be empty
  std::string mock_llm_script;    // resolved path; used under --mock
  std::string mock_model_script;  // resolved path; used under --mock

  const LlmProfile& profile_for(const std::string& role_name) const;
};

AppConfig load_config(const std::string& path);

}  // namespace esp
