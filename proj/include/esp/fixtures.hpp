#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "esp/core.hpp"

namespace esp::fixtures {

/// In-repo model endpoint implementing the invocation wire contract
/// (POST /invoke/<name> {task_type, args} -> {output}) with scriptable
/// outputs, delays, and failure injection. Used by tests and --mock runs.
class FixtureModelServer {
 public:
  struct ModelScript {
    Json output;          // payload placed under "output"
    int delay_ms = 0;     // fixed injected latency; exceed the client timeout
                          // to drive timeout paths
    int jitter_ms = 0;    // extra uniform latency in [0, jitter_ms], seeded
    int http_status = 200;
  };

  explicit FixtureModelServer(std::uint64_t seed = 0);
  ~FixtureModelServer();

  FixtureModelServer(const FixtureModelServer&) = delete;
  FixtureModelServer& operator=(const FixtureModelServer&) = delete;

  void set_model(const std::string& name, ModelScript script);
  void load_script_file(const std::string& path);

  void start();
  void stop();

  int port() const;
  std::string base_url() const;
  std::string endpoint_for(const std::string& name) const;

  int request_count() const;
  int max_concurrent() const;  // high-water mark of in-flight handlers
  std::vector<std::string> request_bodies(const std::string& name) const;
  void reset_counters();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Minimal hub-style REST fixture:
///   GET /api/models?pipeline_tag=<type>&sort=<metric>&limit=N
/// -> JSON array of {id, pipeline_tag, likes, downloads, description}.
class FixtureHubServer {
 public:
  struct HubModel {
    std::string id;
    long long downloads = 0;
    long long likes = 0;
    int trending_pos = 0;  // 1-based explicit trending order
    std::string description;
  };

  FixtureHubServer();
  ~FixtureHubServer();

  FixtureHubServer(const FixtureHubServer&) = delete;
  FixtureHubServer& operator=(const FixtureHubServer&) = delete;

  void add_model(const std::string& task_type, HubModel model);

  void start();
  void stop();

  int port() const;
  std::string base_url() const;
  int request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Remote-embedding fixture implementing POST /embed {texts} -> {vectors}
/// with deterministic hash-TF vectors of the configured dimension.
class FixtureEmbeddingServer {
 public:
  explicit FixtureEmbeddingServer(int dimension);
  ~FixtureEmbeddingServer();

  FixtureEmbeddingServer(const FixtureEmbeddingServer&) = delete;
  FixtureEmbeddingServer& operator=(const FixtureEmbeddingServer&) = delete;

  void start();
  void stop();

  int port() const;
  std::string endpoint() const;  // full /embed URL

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace esp::fixtures
