#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/expert_policy.hpp"
#include "tomxrl/intervention.hpp"
#include "tomxrl/session.hpp"
#include "tomxrl/sim_human.hpp"
#include "tomxrl/task_env.hpp"
#include "tomxrl/tom_model.hpp"

namespace tomxrl {

struct ExperimentConfig {
  std::vector<ConditionKind> conditions{ConditionKind::TomXrl, ConditionKind::XrlOnly, ConditionKind::TomOnly,
                                        ConditionKind::None};
  int participants = 200;  // per condition
  std::vector<std::string> profiles{"time_blind"};
  int trials = 12;
  int training_trials = 3;
  double rho = 0.095;
  // Match rho to the realized ToM+XRL intervention rate.
  bool calibrate_rho = false;
  int folds = 10;
  int threads = 0;  // 0: hardware concurrency
  int bootstrap_samples = 2000;
};

struct ServiceConfig {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::filesystem::path> log_dir;  // completed session logs
};

struct AppConfig {
  PayoffSpec payoff;
  TomConfig tom;
  Templates templates = Templates::defaults();
  std::map<std::string, ProfileSpec> profiles = default_profiles();
  SolverOptions solver;
  std::optional<std::filesystem::path> policy_path;
  ExperimentConfig experiment;
  ServiceConfig service;
};

// Relative paths inside the document resolve against `base_dir`.
AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

// Loads the configured policy when the file exists, otherwise solves it from
// scratch. A stored policy for a different payoff spec is a ConfigError.
Policy obtain_policy(const AppConfig& config);

EngineContext make_context(const AppConfig& config);

}  // namespace tomxrl
