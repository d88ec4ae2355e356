#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tomxrl/config.hpp"
#include "tomxrl/harness.hpp"
#include "tomxrl/service.hpp"
#include "tomxrl/xrl_explain.hpp"

namespace {

using nlohmann::json;
using namespace tomxrl;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) {
  g_stop = 1;
}

json read_json_arg(const std::string& arg) {
  // Inline JSON or a path to a JSON file.
  try {
    if (!arg.empty() && arg.front() == '{') return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw ConfigError("cannot open " + arg);
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
}

int train_policy_cmd(const std::string& config_path, const std::string& out) {
  const AppConfig cfg = load_config(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  const Policy p = train_policy(cfg.payoff, {}, cfg.solver);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_policy(p, out);
  const StateIndexer& ix = p.indexer();
  std::size_t calls = 0;
  for (Action a : p.actions()) calls += a == Action::Call ? 1 : 0;
  std::cout << "states " << ix.size() << "  iterations " << p.iterations << "  call-states " << calls
            << "  time " << format_double(secs) << "s\n"
            << "wrote " << out << '\n';
  return 0;
}

int explain_cmd(const std::string& policy_path, const std::string& state_arg, const std::string& config_path) {
  const Policy policy = load_policy(policy_path);
  const Templates templates = config_path.empty() ? Templates::defaults() : load_config(config_path).templates;
  const DiscreteState s = parse_discrete_state(read_json_arg(state_arg), policy.indexer());
  const CounterfactualResult cf = counterfactual_search(policy, s);
  const Intervention expl = explain_expert(s, policy, templates, 0);
  json out = cf;
  out["state_key"] = state_key(s, policy.indexer());
  out["ranking"] = ranking_to_json(feature_importance(cf));
  out["text"] = expl.text;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
  const AppConfig cfg = load_config(config_path);
  const EngineContext ctx = make_context(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(cfg, ctx, seed);
  write_experiment(result, out_dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const ConditionRun& run : result.runs) {
    std::cout << to_string(run.spec.kind) << ": " << run.participants.size() << " participants, "
              << run.rounds() << " rounds, intervention rate " << format_double(run.intervention_rate()) << '\n';
  }
  if (result.contrast) {
    const auto& c = *result.contrast;
    std::cout << "trial " << c.trial << " ToM+XRL - None: " << format_double(c.mean_diff) << " [" << format_double(c.lo)
              << ", " << format_double(c.hi) << "]\n";
  }
  std::cout << "wrote " << out_dir << " in " << format_double(secs) << "s\n";
  return 0;
}

int serve_cmd(const std::string& config_path, std::optional<int> port) {
  AppConfig cfg = load_config(config_path);
  cfg.service.port = resolve_port(port, std::getenv(kPortEnvVar), cfg.service.port);
  Service service(make_context(cfg), cfg.service);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = service.start();
  std::cout << "listening on " << cfg.service.host << ':' << bound << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return 0;
}

int replay_tom_cmd(const std::string& config_path, const std::string& log_path, const std::string& participant,
                   const std::string& dot_out, const std::string& snapshot_out) {
  const AppConfig cfg = load_config(config_path);
  std::ifstream in(log_path);
  if (!in) throw ConfigError("cannot open " + log_path);
  TomModel model(cfg.payoff, cfg.tom);
  int n = 0;
  for (const RoundRecord& r : read_jsonl(in)) {
    if (r.participant != participant) continue;
    model.observe({discretize(r.state, cfg.payoff), r.action});
    ++n;
  }
  if (n == 0) throw DataError("no rounds for participant " + participant);
  auto write = [](const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
      std::cout << text;
      return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
  };
  write(dot_out, model.dag().to_dot());
  if (!snapshot_out.empty()) write(snapshot_out, snapshot(model).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tomxrl: ToM-gated explainable recommendations for a bomb-defusal team task"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  auto* train = app.add_subcommand("train-policy", "Solve the expert policy and save it");
  train->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Policy output file")->required();

  std::string policy_path;
  std::string state_arg;
  auto* explain = app.add_subcommand("explain", "Counterfactual explanation for one state");
  explain->add_option("--policy", policy_path, "Policy file")->required()->check(CLI::ExistingFile);
  explain->add_option("--state", state_arg, "State as inline JSON or a JSON file")->required();
  explain->add_option("--config", config_path, "Config file for templates");

  std::uint64_t seed = 0;
  auto* experiment = app.add_subcommand("run-experiment", "Run all conditions with simulated humans");
  experiment->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out", out, "Output directory")->required();
  experiment->add_option("--seed", seed, "Master seed")->required();

  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Serve the session API");
  serve->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, std::string("Port; overrides ") + kPortEnvVar + " and the config");

  std::string log_path;
  std::string participant;
  std::string snapshot_out;
  auto* replay = app.add_subcommand("replay-tom", "Rebuild a participant's ToM model from a log");
  replay->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  replay->add_option("--log", log_path, "Round log (.jsonl)")->required()->check(CLI::ExistingFile);
  replay->add_option("--participant", participant, "Participant id")->required();
  replay->add_option("--dot", out, "DOT output (default stdout)");
  replay->add_option("--snapshot", snapshot_out, "JSON snapshot output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return train_policy_cmd(config_path, out);
    if (*explain) return explain_cmd(policy_path, state_arg, config_path);
    if (*experiment) return run_experiment_cmd(config_path, out, seed);
    if (*serve) return serve_cmd(config_path, port);
    if (*replay) return replay_tom_cmd(config_path, log_path, participant, out, snapshot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
