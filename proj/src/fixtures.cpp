#include "esp/fixtures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "esp/integrator.hpp"
#include "http_support.hpp"

namespace esp::fixtures {

namespace {

constexpr const char* kHost = "127.0.0.1";

// The server must never serialize client requests below the bound a test is
// asserting, so give it a generous handler pool.
httplib::TaskQueue* make_pool() { return new httplib::ThreadPool(64); }

}  // namespace

// ---------------------------------------------------------------------------
// FixtureModelServer
// ---------------------------------------------------------------------------

struct FixtureModelServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::uint64_t seed;

  mutable std::mutex mu;
  std::map<std::string, ModelScript> scripts;
  std::map<std::string, std::vector<std::string>> bodies;
  std::mt19937_64 rng;

  std::atomic<int> in_flight{0};
  std::atomic<int> high_water{0};
  std::atomic<int> requests{0};

  explicit Impl(std::uint64_t s) : seed(s), rng(s) {}
};

FixtureModelServer::FixtureModelServer(std::uint64_t seed)
    : impl_(std::make_unique<Impl>(seed)) {
  impl_->server.new_task_queue = make_pool;
  impl_->server.Post(R"(/invoke/([A-Za-z0-9_\-\.]+))",
                     [this](const httplib::Request& req, httplib::Response& res) {
    Impl& impl = *impl_;
    impl.requests.fetch_add(1);
    const int now = impl.in_flight.fetch_add(1) + 1;
    int seen = impl.high_water.load();
    while (now > seen && !impl.high_water.compare_exchange_weak(seen, now)) {
    }

    const std::string name = req.matches[1];
    ModelScript script;
    bool known = false;
    int delay = 0;
    {
      std::lock_guard lock(impl.mu);
      impl.bodies[name].push_back(req.body);
      auto it = impl.scripts.find(name);
      if (it != impl.scripts.end()) {
        known = true;
        script = it->second;
        delay = script.delay_ms;
        if (script.jitter_ms > 0) {
          std::uniform_int_distribution<int> dist(0, script.jitter_ms);
          delay += dist(impl.rng);
        }
      }
    }

    if (!known) {
      res.status = 404;
      res.set_content("{\"error\":\"unknown model\"}", "application/json");
      impl.in_flight.fetch_sub(1);
      return;
    }
    if (delay > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    if (script.http_status != 200) {
      res.status = script.http_status;
      res.set_content("{\"error\":\"scripted failure\"}", "application/json");
    } else {
      res.set_content(Json{{"output", script.output}}.dump(), "application/json");
    }
    impl.in_flight.fetch_sub(1);
  });
}

FixtureModelServer::~FixtureModelServer() { stop(); }

void FixtureModelServer::set_model(const std::string& name, ModelScript script) {
  std::lock_guard lock(impl_->mu);
  impl_->scripts[name] = std::move(script);
}

void FixtureModelServer::load_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model script " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseFailure, fmt::format("model script {}: {}", path, e.what()));
  }
  for (const auto& [name, entry] : j.at("models").items()) {
    ModelScript script;
    script.output = entry.value("output", Json());
    script.delay_ms = entry.value("delay_ms", 0);
    script.jitter_ms = entry.value("jitter_ms", 0);
    script.http_status = entry.value("http_status", 200);
    set_model(name, std::move(script));
  }
}

void FixtureModelServer::start() {
  impl_->port = impl_->server.bind_to_any_port(kHost);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void FixtureModelServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int FixtureModelServer::port() const { return impl_->port; }

std::string FixtureModelServer::base_url() const {
  return fmt::format("http://{}:{}", kHost, impl_->port);
}

std::string FixtureModelServer::endpoint_for(const std::string& name) const {
  return fmt::format("{}/invoke/{}", base_url(), name);
}

int FixtureModelServer::request_count() const { return impl_->requests.load(); }

int FixtureModelServer::max_concurrent() const { return impl_->high_water.load(); }

std::vector<std::string> FixtureModelServer::request_bodies(const std::string& name) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->bodies.find(name);
  return it == impl_->bodies.end() ? std::vector<std::string>{} : it->second;
}

void FixtureModelServer::reset_counters() {
  impl_->requests.store(0);
  impl_->high_water.store(0);
  std::lock_guard lock(impl_->mu);
  impl_->bodies.clear();
}

// ---------------------------------------------------------------------------
// FixtureHubServer
// ---------------------------------------------------------------------------

struct FixtureHubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  std::map<std::string, std::vector<HubModel>> by_type;
  std::atomic<int> requests{0};
};

FixtureHubServer::FixtureHubServer() : impl_(std::make_unique<Impl>()) {
  impl_->server.new_task_queue = make_pool;
  impl_->server.Get("/api/models", [this](const httplib::Request& req, httplib::Response& res) {
    Impl& impl = *impl_;
    impl.requests.fetch_add(1);
    const std::string type = req.get_param_value("pipeline_tag");
    const std::string sort = req.get_param_value("sort");
    const int limit = req.has_param("limit") ? std::stoi(req.get_param_value("limit")) : 20;

    std::vector<HubModel> models;
    {
      std::lock_guard lock(impl.mu);
      auto it = impl.by_type.find(type);
      if (it != impl.by_type.end()) models = it->second;
    }
    if (sort == "downloads") {
      std::stable_sort(models.begin(), models.end(),
                       [](const HubModel& a, const HubModel& b) { return a.downloads > b.downloads; });
    } else if (sort == "likes") {
      std::stable_sort(models.begin(), models.end(),
                       [](const HubModel& a, const HubModel& b) { return a.likes > b.likes; });
    } else if (sort == "trending") {
      std::stable_sort(models.begin(), models.end(), [](const HubModel& a, const HubModel& b) {
        return a.trending_pos < b.trending_pos;
      });
    }
    if (static_cast<int>(models.size()) > limit) models.resize(static_cast<std::size_t>(limit));

    Json body = Json::array();
    for (const HubModel& m : models) {
      body.push_back(Json{{"id", m.id},
                          {"pipeline_tag", type},
                          {"likes", m.likes},
                          {"downloads", m.downloads},
                          {"description", m.description}});
    }
    res.set_content(body.dump(), "application/json");
  });
}

FixtureHubServer::~FixtureHubServer() { stop(); }

void FixtureHubServer::add_model(const std::string& task_type, HubModel model) {
  std::lock_guard lock(impl_->mu);
  impl_->by_type[task_type].push_back(std::move(model));
}

void FixtureHubServer::start() {
  impl_->port = impl_->server.bind_to_any_port(kHost);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void FixtureHubServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int FixtureHubServer::port() const { return impl_->port; }

std::string FixtureHubServer::base_url() const {
  return fmt::format("http://{}:{}", kHost, impl_->port);
}

int FixtureHubServer::request_count() const { return impl_->requests.load(); }

// ---------------------------------------------------------------------------
// FixtureEmbeddingServer
// ---------------------------------------------------------------------------

struct FixtureEmbeddingServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  int dimension;

  explicit Impl(int dim) : dimension(dim) {}
};

FixtureEmbeddingServer::FixtureEmbeddingServer(int dimension)
    : impl_(std::make_unique<Impl>(dimension)) {
  impl_->server.new_task_queue = make_pool;
  impl_->server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
    Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("texts")) {
      res.status = 400;
      return;
    }
    EmbeddingProvider provider;
    provider.mode = EmbeddingMode::DeterministicHashTf;
    provider.dimension = impl_->dimension;
    auto vectors = embed(provider, body["texts"].get<std::vector<std::string>>());
    res.set_content(Json{{"vectors", vectors}}.dump(), "application/json");
  });
}

FixtureEmbeddingServer::~FixtureEmbeddingServer() { stop(); }

void FixtureEmbeddingServer::start() {
  impl_->port = impl_->server.bind_to_any_port(kHost);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void FixtureEmbeddingServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int FixtureEmbeddingServer::port() const { return impl_->port; }

std::string FixtureEmbeddingServer::endpoint() const {
  return fmt::format("http://{}:{}/embed", kHost, impl_->port);
}

}  // namespace esp::fixtures
