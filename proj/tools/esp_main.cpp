#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "esp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"esp — plan requests, fan each subtask out to ranked candidate models, "
               "select the optimal result, and compose a response"};
  app.require_subcommand(1);

  esp::cli::GlobalFlags flags;

  auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "Config file (JSON)");
    cmd->add_flag("--mock", flags.mock, "Use the in-repo mock LLM and model fixtures");
    cmd->add_option("--seed", flags.seed, "Seed for randomized fixture behavior");
  };

  std::string request_arg;
  auto* run = app.add_subcommand("run", "Run one request end to end");
  run->add_option("request", request_arg, "Request text, or a file containing it")->required();
  add_common(run);
  run->add_option("--out", flags.out, "Write the response JSON to this file");
  run->add_option("--trace", flags.trace, "Write the execution trace and decisions JSON");

  std::string dataset_arg;
  auto* eval = app.add_subcommand("eval", "Evaluate planning quality over a dataset");
  eval->add_option("dataset", dataset_arg, "Line-delimited JSON dataset")->required();
  add_common(eval);
  eval->add_option("--out", flags.out, "Directory for report.json and report.txt");
  eval->add_flag("--planner-only", flags.planner_only,
                 "Skip execution/integration; score plans directly");

  std::string hub_arg;
  std::string snapshot_arg;
  std::vector<std::string> types_arg;
  auto* sync = app.add_subcommand("sync", "Sync the model catalog from a hub endpoint");
  sync->add_option("hub", hub_arg, "Hub base URL")->required();
  add_common(sync);
  sync->add_option("--types", types_arg, "Task types to sync")->delimiter(',');
  sync->add_option("--snapshot", snapshot_arg, "Snapshot file to write (and fall back to)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return esp::cli::cmd_run(request_arg, flags, std::cout, std::cerr);
  }
  if (eval->parsed()) {
    return esp::cli::cmd_eval(dataset_arg, flags, std::cout, std::cerr);
  }
  return esp::cli::cmd_sync(hub_arg, types_arg, snapshot_arg, flags, std::cout, std::cerr);
}
