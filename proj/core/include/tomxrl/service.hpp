#pragma once

#include <memory>
#include <optional>
#include <string>

#include "tomxrl/config.hpp"
#include "tomxrl/session.hpp"

namespace tomxrl {

inline constexpr const char* kPortEnvVar = "TOMXRL_PORT";

// Command line beats the environment beats the config file.
int resolve_port(std::optional<int> cli_port, const char* env_value, int config_port);

// In-memory session store behind a JSON/HTTP interface:
//   POST /sessions                 {condition, seed?, config_overrides?}
//   GET  /sessions/{id}/state
//   POST /sessions/{id}/action     {action}
//   GET  /sessions/{id}/log
// A session handles one request at a time; a request that finds it busy gets 409.
class Service {
 public:
  Service(EngineContext context, ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tomxrl
