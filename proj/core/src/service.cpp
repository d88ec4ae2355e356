#include "tomxrl/service.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tomxrl/harness.hpp"

namespace tomxrl {

using nlohmann::json;

int resolve_port(std::optional<int> cli_port, const char* env_value, int config_port) {
  auto check = [](int p) {
    if (p < 0 || p > 65535) throw ConfigError("port out of range: " + std::to_string(p));
    return p;
  };
  if (cli_port) return check(*cli_port);
  if (env_value && *env_value) {
    const std::string_view s(env_value);
    int p = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), p);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(std::string(kPortEnvVar) + " is not a port number: " + std::string(s));
    }
    return check(p);
  }
  return check(config_port);
}

namespace {

struct Session {
  Session(EngineContext ctx, SessionOptions opt) : engine(std::move(ctx), std::move(opt)) {}
  std::mutex mutex;
  SessionEngine engine;
  std::chrono::system_clock::time_point created = std::chrono::system_clock::now();
  bool persisted = false;
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

}  // namespace

struct Service::Impl {
  Impl(EngineContext c, ServiceConfig cfg) : context(std::move(c)), config(std::move(cfg)) {
    std::random_device rd;
    salt = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    routes();
  }

  EngineContext context;
  ServiceConfig config;
  httplib::Server server;
  std::thread thread;
  std::uint64_t salt = 0;
  std::atomic<std::uint64_t> counter{0};
  mutable std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  json view(const std::string& id, const Session& s) const {
    json v = s.engine.view();
    v["session_id"] = id;
    return v;
  }

  void persist(const std::string& id, Session& s) {
    if (!config.log_dir || s.persisted) return;
    std::filesystem::create_directories(*config.log_dir);
    std::ofstream out(*config.log_dir / (id + ".jsonl"));
    if (!out) throw ConfigError("cannot write session log for " + id);
    write_jsonl(out, s.engine.log());
    s.persisted = true;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error&) {
      return error(res, 400, "request body is not JSON");
    }
    if (!body.is_object() || !body.contains("condition") || !body.at("condition").is_string()) {
      return error(res, 400, "missing condition");
    }
    const auto kind = parse_condition(body.at("condition").get<std::string>());
    if (!kind) return error(res, 400, "unknown condition: " + body.at("condition").get<std::string>());

    SessionOptions opt;
    opt.condition = *kind;
    json overrides = body.value("config_overrides", json::object());
    if (body.contains("seed")) overrides["seed"] = body.at("seed");
    try {
      if (overrides.contains("seed")) {
        opt.seed = overrides.at("seed").get<std::uint64_t>();
      } else {
        std::random_device rd;
        opt.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      }
      opt.rho = overrides.value("rho", opt.rho);
      opt.trials = overrides.value("trials", opt.trials);
      opt.training_trials = overrides.value("training_trials", opt.training_trials);
    } catch (const json::exception& e) {
      return error(res, 400, std::string("bad config_overrides: ") + e.what());
    }

    const std::string id = hex64(mix_seed(salt ^ counter.fetch_add(1)));
    opt.participant = id;
    std::shared_ptr<Session> session;
    try {
      session = std::make_shared<Session>(context, opt);
    } catch (const ConfigError& e) {
      return error(res, 400, e.what());
    }
    {
      std::unique_lock lock(sessions_mutex);
      sessions.emplace(id, session);
    }
    json out = view(id, *session);
    reply(res, 201, json{{"session_id", id}, {"view", out}});
  }

  void state(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto s = find(id);
    if (!s) return error(res, 404, "unknown session");
    std::unique_lock lock(s->mutex, std::try_to_lock);
    if (!lock) return error(res, 409, "session busy");
    reply(res, 200, view(id, *s));
  }

  void action(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto s = find(id);
    if (!s) return error(res, 404, "unknown session");
    std::optional<Action> a;
    try {
      const json body = json::parse(req.body);
      if (body.is_object() && body.contains("action") && body.at("action").is_string()) {
        a = parse_action(body.at("action").get<std::string>());
      }
    } catch (const json::parse_error&) {
    }
    if (!a) return error(res, 422, "action must be \"Solo\" or \"Call\"");

    std::unique_lock lock(s->mutex, std::try_to_lock);
    if (!lock) return error(res, 409, "session busy");
    if (s->engine.finished()) return error(res, 409, "session finished");
    const ActionResult r = s->engine.apply(*a);
    if (r.finished) persist(id, *s);
    reply(res, 200,
          json{{"reward", r.reward},
               {"time_cost", r.time_cost},
               {"done", r.episode_done},
               {"finished", r.finished},
               {"next_view", view(id, *s)}});
  }

  void log(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    auto s = find(id);
    if (!s) return error(res, 404, "unknown session");
    std::unique_lock lock(s->mutex, std::try_to_lock);
    if (!lock) return error(res, 409, "session busy");
    reply(res, 200, json{{"session_id", id}, {"rounds", s->engine.log()}});
  }

  void routes() {
    server.Post("/sessions", [this](const auto& req, auto& res) { create(req, res); });
    server.Get("/sessions/:id/state", [this](const auto& req, auto& res) { state(req, res); });
    server.Post("/sessions/:id/action", [this](const auto& req, auto& res) { action(req, res); });
    server.Get("/sessions/:id/log", [this](const auto& req, auto& res) { log(req, res); });
    server.set_exception_handler([](const auto&, auto& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        error(res, 500, e.what());
      } catch (...) {
        error(res, 500, "internal error");
      }
    });
    if (config.static_dir && !server.set_mount_point("/", config.static_dir->string())) {
      throw ConfigError("static directory not found: " + config.static_dir->string());
    }
  }
};

Service::Service(EngineContext context, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(context), std::move(config))) {}

Service::~Service() {
  stop();
}

int Service::start() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) throw ConfigError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::run() {
  if (!impl_->server.listen(impl_->config.host, impl_->config.port)) {
    throw ConfigError("cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t Service::session_count() const {
  std::shared_lock lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

}  // namespace tomxrl
