#include "tomxrl/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void read_experiment(const json& j, ExperimentConfig& e, const std::map<std::string, ProfileSpec>& profiles) {
  if (j.contains("conditions")) {
    e.conditions.clear();
    for (const auto& c : j.at("conditions")) {
      auto kind = parse_condition(c.get<std::string>());
      if (!kind) throw ConfigError("unknown condition " + c.get<std::string>());
      e.conditions.push_back(*kind);
    }
    if (e.conditions.empty()) throw ConfigError("experiment needs at least one condition");
  }
  e.participants = j.value("participants", e.participants);
  if (j.contains("profiles")) e.profiles = j.at("profiles").get<std::vector<std::string>>();
  e.trials = j.value("trials", e.trials);
  e.training_trials = j.value("training_trials", e.training_trials);
  if (j.contains("rho")) {
    const json& rho = j.at("rho");
    if (rho.is_string()) {
      if (rho.get<std::string>() != "calibrate") throw ConfigError("rho must be a number or \"calibrate\"");
      e.calibrate_rho = true;
    } else {
      e.rho = rho.get<double>();
      e.calibrate_rho = false;
    }
  }
  e.folds = j.value("folds", e.folds);
  e.threads = j.value("threads", e.threads);
  e.bootstrap_samples = j.value("bootstrap_samples", e.bootstrap_samples);

  if (e.participants < 1) throw ConfigError("participants must be >= 1");
  if (e.trials < 1) throw ConfigError("trials must be >= 1");
  if (e.training_trials < 0 || e.training_trials > e.trials) throw ConfigError("training_trials out of range");
  if (!(e.rho >= 0.0 && e.rho <= 1.0)) throw ConfigError("rho must be in [0,1]");
  if (e.folds < 2) throw ConfigError("folds must be >= 2");
  if (e.profiles.empty()) throw ConfigError("experiment needs at least one profile");
  for (const std::string& p : e.profiles) {
    if (!profiles.contains(p)) throw ConfigError("unknown profile " + p);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

AppConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;
  try {
    if (j.contains("payoff")) c.payoff = j.at("payoff").get<PayoffSpec>();
    if (j.contains("tom")) c.tom = j.at("tom").get<TomConfig>();
    if (j.contains("templates")) c.templates = j.at("templates").get<Templates>();
    if (j.contains("profiles")) {
      for (const auto& [name, body] : j.at("profiles").items()) {
        ProfileSpec p = c.profiles.contains(name) ? c.profiles.at(name) : ProfileSpec{};
        p.name = name;
        from_json(body, p);
        c.profiles[name] = p;
      }
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      c.solver.tol = s.value("tol", c.solver.tol);
      c.solver.max_iterations = s.value("max_iterations", c.solver.max_iterations);
    }
    if (j.contains("policy") && !j.at("policy").is_null()) {
      c.policy_path = resolve(base_dir, j.at("policy").get<std::string>());
    }
    if (j.contains("experiment")) read_experiment(j.at("experiment"), c.experiment, c.profiles);
    if (j.contains("service")) {
      const json& s = j.at("service");
      c.service.port = s.value("port", c.service.port);
      c.service.host = s.value("host", c.service.host);
      if (s.contains("static_dir") && !s.at("static_dir").is_null()) {
        c.service.static_dir = resolve(base_dir, s.at("static_dir").get<std::string>());
      }
      if (s.contains("log_dir") && !s.at("log_dir").is_null()) {
        c.service.log_dir = resolve(base_dir, s.at("log_dir").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.tom.validate();
  return c;
}

AppConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

Policy obtain_policy(const AppConfig& config) {
  if (config.policy_path && fs::exists(*config.policy_path)) {
    Policy p = load_policy(config.policy_path->string());
    if (p.spec_hash != config.payoff.hash()) {
      throw ConfigError("policy " + config.policy_path->string() + " was trained for a different payoff spec");
    }
    return p;
  }
  return train_policy(config.payoff, {}, config.solver);
}

EngineContext make_context(const AppConfig& config) {
  return make_context(config.payoff, obtain_policy(config), config.templates, config.tom);
}

}  // namespace tomxrl
