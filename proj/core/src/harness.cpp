#include "tomxrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;
namespace fs = std::filesystem;

void ConditionSpec::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must be in [0,1]");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (training_trials < 0 || training_trials > trials) throw ConfigError("training_trials out of range");
  if (participants < 1) throw ConfigError("participants must be >= 1");
  if (profiles.empty()) throw ConfigError("condition needs at least one profile");
}

std::size_t ConditionRun::rounds() const {
  std::size_t n = 0;
  for (const auto& p : participants) n += p.rounds.size();
  return n;
}

std::size_t ConditionRun::interventions() const {
  std::size_t n = 0;
  for (const auto& p : participants) {
    for (const auto& r : p.rounds) n += r.intervention ? 1 : 0;
  }
  return n;
}

double ConditionRun::intervention_rate() const {
  const std::size_t n = rounds();
  return n == 0 ? 0.0 : static_cast<double>(interventions()) / static_cast<double>(n);
}

std::uint64_t participant_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, static_cast<std::uint64_t>(index));
}

std::string condition_slug(ConditionKind k) {
  switch (k) {
    case ConditionKind::TomXrl:
      return "tom_xrl";
    case ConditionKind::XrlOnly:
      return "xrl_only";
    case ConditionKind::TomOnly:
      return "tom_only";
    case ConditionKind::None:
      return "none";
  }
  return "unknown";
}

ParticipantRun simulate_participant(const EngineContext& ctx, const SessionOptions& options,
                                    const ProfileSpec& profile) {
  SessionEngine engine(ctx, options);
  HumanProfile human(profile, ctx.policy, ctx.payoff);
  Rng rng(derive_seed(options.seed, 3));
  while (!engine.finished()) {
    const std::optional<Intervention> pending = engine.pending();
    const DiscreteState s = discretize(engine.state(), *ctx.payoff);
    engine.apply(act(human, s, pending, rng));
    if (pending) human = absorb(std::move(human), *pending, rng);
  }
  return {options.participant, profile.name, engine.log()};
}

ConditionRun run_condition(const ConditionSpec& cond, const std::map<std::string, ProfileSpec>& profiles,
                           const EngineContext& ctx, int threads) {
  cond.validate();
  for (const std::string& p : cond.profiles) {
    if (!profiles.contains(p)) throw ConfigError("unknown profile " + p);
  }
  ConditionRun run;
  run.spec = cond;
  run.participants.resize(static_cast<std::size_t>(cond.participants));

  auto one = [&](int i) {
    SessionOptions opt;
    opt.condition = cond.kind;
    opt.rho = cond.rho;
    opt.trials = cond.trials;
    opt.training_trials = cond.training_trials;
    opt.seed = participant_seed(cond.seed, i);
    char id[16];
    std::snprintf(id, sizeof id, "%04d", i);
    opt.participant = condition_slug(cond.kind) + "-" + id;
    const ProfileSpec& profile = profiles.at(cond.profiles[static_cast<std::size_t>(i) % cond.profiles.size()]);
    run.participants[static_cast<std::size_t>(i)] = simulate_participant(ctx, opt, profile);
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, cond.participants);
  if (n_threads == 1) {
    for (int i = 0; i < cond.participants; ++i) one(i);
    return run;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < cond.participants; i = next++) {
        try {
          one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return run;
}

std::vector<RoundRecord> flatten(const ConditionRun& run) {
  std::vector<RoundRecord> out;
  out.reserve(run.rounds());
  for (const auto& p : run.participants) out.insert(out.end(), p.rounds.begin(), p.rounds.end());
  return out;
}

namespace {

// Keys in first-appearance order.
template <typename Key>
class Ordered {
 public:
  std::size_t slot(const Key& k) {
    auto [it, inserted] = index_.try_emplace(k, keys_.size());
    if (inserted) keys_.push_back(k);
    return it->second;
  }
  const std::vector<Key>& keys() const { return keys_; }

 private:
  std::map<Key, std::size_t> index_;
  std::vector<Key> keys_;
};

bool has_edge(const std::string& edges, Feature f) {
  const std::string want = std::string(to_string(f)) + "->action";
  std::size_t start = 0;
  while (start <= edges.size()) {
    const std::size_t end = std::min(edges.find(';', start), edges.size());
    if (edges.compare(start, end - start, want) == 0) return true;
    start = end + 1;
  }
  return false;
}

std::string na_or(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

int action_label(Action a) {
  return a == Action::Call ? 1 : 0;
}

std::vector<int> one_hot(const DiscreteState& s, const PayoffSpec& spec) {
  return {s.bomb_type - 1, spec.bomb_levels() + s.distance_bin,
          spec.bomb_levels() + spec.distance_bins() + s.time_bin};
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad number in CSV: " + s);
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad integer in CSV: " + s);
  return v;
}

}  // namespace

std::vector<TrialScore> participant_scores(const std::vector<RoundRecord>& rounds) {
  Ordered<std::tuple<std::string, std::string, int>> keys;
  std::vector<TrialScore> out;
  for (const RoundRecord& r : rounds) {
    const std::size_t i = keys.slot({r.condition, r.participant, r.trial});
    if (i == out.size()) out.push_back({r.condition, r.participant, r.trial, r.training, 0.0});
    out[i].score += r.reward;
  }
  return out;
}

std::vector<CurveRow> learning_curves(const std::vector<RoundRecord>& rounds) {
  const std::vector<TrialScore> scores = participant_scores(rounds);
  Ordered<std::string> conditions;
  std::map<std::pair<std::size_t, int>, std::vector<const TrialScore*>> cells;
  for (const TrialScore& s : scores) cells[{conditions.slot(s.condition), s.trial}].push_back(&s);

  std::vector<CurveRow> out;
  for (const auto& [key, members] : cells) {
    CurveRow row;
    row.condition = conditions.keys()[key.first];
    row.trial = key.second;
    row.training = members.front()->training;
    row.n = static_cast<int>(members.size());
    double sum = 0.0;
    for (const TrialScore* s : members) sum += s->score;
    row.mean = sum / row.n;
    if (row.n > 1) {
      double ss = 0.0;
      for (const TrialScore* s : members) ss += (s->score - row.mean) * (s->score - row.mean);
      row.se = std::sqrt(ss / (row.n - 1)) / std::sqrt(static_cast<double>(row.n));
    }
    out.push_back(row);
  }
  return out;
}

std::vector<ComplianceRow> compliance_metrics(const std::vector<RoundRecord>& rounds) {
  Ordered<std::string> conditions;
  std::vector<ComplianceRow> out;
  auto row_for = [&](const std::string& c) -> ComplianceRow& {
    const std::size_t i = conditions.slot(c);
    if (i == out.size()) {
      out.emplace_back();
      out.back().condition = c;
    }
    return out[i];
  };

  // Per participant, the index of the next structure pass at or after each round.
  std::map<std::string, std::vector<std::size_t>> by_participant;
  for (std::size_t i = 0; i < rounds.size(); ++i) by_participant[rounds[i].participant].push_back(i);

  for (const RoundRecord& r : rounds) row_for(r.condition);
  for (const auto& [pid, idx] : by_participant) {
    std::optional<std::size_t> next_pass;
    std::vector<std::optional<std::size_t>> pass_after(idx.size());
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (rounds[idx[k]].structure_pass) next_pass = idx[k];
      pass_after[k] = next_pass;
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const RoundRecord& r = rounds[idx[k]];
      if (!r.intervention) continue;
      ComplianceRow& row = row_for(r.condition);
      ++row.interventions;
      if (r.intervention->recommended) {
        ++row.recommendations;
        if (r.action == *r.intervention->recommended) ++row.followed;
      }
      const Feature f = r.intervention->feature;
      if (!has_edge(r.dag_before, f) && pass_after[k]) {
        ++row.eligible;
        if (has_edge(rounds[*pass_after[k]].dag_after, f)) ++row.adopted;
      }
    }
  }
  for (ComplianceRow& row : out) {
    if (row.recommendations > 0) row.short_term = static_cast<double>(row.followed) / row.recommendations;
    if (row.eligible > 0) row.long_term = static_cast<double>(row.adopted) / row.eligible;
  }
  return out;
}

double LogisticModel::probability(const std::vector<int>& active) const {
  double z = weights.at(0);
  for (int c : active) z += weights.at(static_cast<std::size_t>(c) + 1);
  return sigmoid(z);
}

LogisticModel train_logistic(const std::vector<std::vector<int>>& features, const std::vector<int>& labels,
                             int n_columns, const LogisticOptions& options) {
  if (features.size() != labels.size()) throw UsageError("features and labels differ in length");
  if (options.learning_rate <= 0.0 || options.iterations < 0) throw ConfigError("bad logistic options");
  LogisticModel m;
  m.weights.assign(static_cast<std::size_t>(n_columns) + 1, 0.0);
  if (features.empty()) return m;
  const double n = static_cast<double>(features.size());
  std::vector<double> grad(m.weights.size());
  for (int it = 0; it < options.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double p = m.probability(features[i]);
      const double y = labels[i];
      loss -= y * std::log(std::max(p, 1e-300)) + (1 - y) * std::log(std::max(1 - p, 1e-300));
      const double g = p - y;
      grad[0] += g;
      for (int c : features[i]) grad[static_cast<std::size_t>(c) + 1] += g;
    }
    m.loss_history.push_back(loss / n);
    for (std::size_t k = 0; k < grad.size(); ++k) m.weights[k] -= options.learning_rate * grad[k] / n;
  }
  return m;
}

std::vector<PredictionRow> prediction_eval(const std::vector<RoundRecord>& rounds, const PayoffSpec& spec,
                                           int folds, const LogisticOptions& options) {
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (rounds.empty()) throw DataError("no rounds to evaluate");
  Ordered<std::string> conditions;
  std::vector<std::vector<const RoundRecord*>> per_condition;
  for (const RoundRecord& r : rounds) {
    const std::size_t c = conditions.slot(r.condition);
    if (c == per_condition.size()) per_condition.emplace_back();
    per_condition[c].push_back(&r);
  }
  const int n_columns = spec.bomb_levels() + spec.distance_bins() + spec.time_bins();

  std::vector<PredictionRow> out;
  for (std::size_t c = 0; c < per_condition.size(); ++c) {
    const auto& recs = per_condition[c];
    Ordered<std::string> participants;
    std::vector<int> fold_of;
    for (const RoundRecord* r : recs) fold_of.push_back(static_cast<int>(participants.slot(r->participant) % folds));
    if (static_cast<int>(participants.keys().size()) < folds) {
      throw ConfigError("condition " + conditions.keys()[c] + " has fewer participants than folds");
    }

    auto blank = [&](const char* method) {
      PredictionRow row;
      row.condition = conditions.keys()[c];
      row.method = method;
      row.folds = folds;
      return row;
    };
    PredictionRow tom = blank("tom");
    PredictionRow majority = blank("majority");
    PredictionRow logistic = blank("logistic");
    for (const RoundRecord* r : recs) {
      if (!r->a_pred) continue;
      ++tom.n;
      tom.correct += *r->a_pred == r->action ? 1 : 0;
    }
    for (int f = 0; f < folds; ++f) {
      std::vector<std::vector<int>> x;
      std::vector<int> y;
      long calls = 0;
      for (std::size_t i = 0; i < recs.size(); ++i) {
        if (fold_of[i] == f) continue;
        x.push_back(one_hot(discretize(recs[i]->state, spec), spec));
        y.push_back(action_label(recs[i]->action));
        calls += y.back();
      }
      const Action majority_action = 2 * calls > static_cast<long>(y.size()) ? Action::Call : Action::Solo;
      const LogisticModel model = train_logistic(x, y, n_columns, options);
      for (std::size_t i = 0; i < recs.size(); ++i) {
        if (fold_of[i] != f || !recs[i]->a_pred) continue;
        ++majority.n;
        majority.correct += majority_action == recs[i]->action ? 1 : 0;
        const double p = model.probability(one_hot(discretize(recs[i]->state, spec), spec));
        const Action guess = p > 0.5 ? Action::Call : Action::Solo;
        ++logistic.n;
        logistic.correct += guess == recs[i]->action ? 1 : 0;
      }
    }
    for (PredictionRow* row : {&tom, &majority, &logistic}) {
      if (row->n > 0) row->accuracy = static_cast<double>(row->correct) / static_cast<double>(row->n);
      out.push_back(*row);
    }
  }
  return out;
}

std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a, const std::vector<double>& b,
                                                 int samples, double level, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw DataError("bootstrap needs two nonempty samples");
  if (samples < 1 || !(level > 0.0 && level < 1.0)) throw ConfigError("bad bootstrap parameters");
  Rng rng(seed);
  auto resampled_mean = [&](const std::vector<double>& v) {
    double s = 0.0;
    const int hi = static_cast<int>(v.size()) - 1;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[static_cast<std::size_t>(rng.uniform_int(0, hi))];
    return s / static_cast<double>(v.size());
  };
  std::vector<double> diffs(static_cast<std::size_t>(samples));
  for (double& d : diffs) {
    const double ma = resampled_mean(a);
    d = ma - resampled_mean(b);
  }
  std::sort(diffs.begin(), diffs.end());
  const double tail = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::floor(q * (samples - 1)));
    return diffs[std::min(i, diffs.size() - 1)];
  };
  return {at(tail), at(1.0 - tail)};
}

std::optional<FinalTrialContrast> final_trial_contrast(const std::vector<RoundRecord>& rounds, int samples,
                                                       std::uint64_t seed) {
  const std::vector<TrialScore> scores = participant_scores(rounds);
  int last = 0;
  for (const TrialScore& s : scores) last = std::max(last, s.trial);
  std::vector<double> a;
  std::vector<double> b;
  for (const TrialScore& s : scores) {
    if (s.trial != last) continue;
    if (s.condition == to_string(ConditionKind::TomXrl)) a.push_back(s.score);
    if (s.condition == to_string(ConditionKind::None)) b.push_back(s.score);
  }
  if (a.empty() || b.empty()) return std::nullopt;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  FinalTrialContrast c;
  c.trial = last;
  c.mean_diff = mean(a) - mean(b);
  std::tie(c.lo, c.hi) = bootstrap_mean_diff_ci(a, b, samples, 0.95, seed);
  c.n_a = static_cast<int>(a.size());
  c.n_b = static_cast<int>(b.size());
  return c;
}

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "condition,trial,mean,se,n,training\n";
  for (const CurveRow& r : rows) {
    out << r.condition << ',' << r.trial << ',' << format_double(r.mean) << ',' << na_or(r.se) << ',' << r.n << ','
        << (r.training ? 1 : 0) << '\n';
  }
}

std::vector<CurveRow> read_curves_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "condition,trial,mean,se,n,training") {
    throw DataError("unexpected curves.csv header");
  }
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) throw DataError("bad curves.csv row: " + line);
    CurveRow r;
    r.condition = cells[0];
    r.trial = parse_int(cells[1]);
    r.mean = parse_double(cells[2]);
    if (cells[3] != "NA") r.se = parse_double(cells[3]);
    r.n = parse_int(cells[4]);
    r.training = cells[5] == "1";
    rows.push_back(r);
  }
  return rows;
}

void write_compliance_csv(std::ostream& out, const std::vector<ComplianceRow>& rows) {
  out << "condition,interventions,recommendations,followed,short_term,eligible,adopted,long_term\n";
  for (const ComplianceRow& r : rows) {
    out << r.condition << ',' << r.interventions << ',' << r.recommendations << ',' << r.followed << ','
        << na_or(r.short_term) << ',' << r.eligible << ',' << r.adopted << ',' << na_or(r.long_term) << '\n';
  }
}

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "condition,method,folds,n,correct,accuracy\n";
  for (const PredictionRow& r : rows) {
    out << r.condition << ',' << r.method << ',' << r.folds << ',' << r.n << ',' << r.correct << ','
        << na_or(r.accuracy) << '\n';
  }
}

void write_participants_csv(std::ostream& out, const std::vector<TrialScore>& rows) {
  out << "condition,participant,trial,training,score\n";
  for (const TrialScore& r : rows) {
    out << r.condition << ',' << r.participant << ',' << r.trial << ',' << (r.training ? 1 : 0) << ','
        << format_double(r.score) << '\n';
  }
}

void write_jsonl(std::ostream& out, const std::vector<RoundRecord>& rounds) {
  for (const RoundRecord& r : rounds) out << json(r).dump() << '\n';
}

std::vector<RoundRecord> read_jsonl(std::istream& in) {
  std::vector<RoundRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<RoundRecord>());
    } catch (const json::parse_error& e) {
      throw DataError(std::string("bad log line: ") + e.what());
    }
  }
  return out;
}

ExperimentResult run_experiment(const AppConfig& config, const EngineContext& ctx, std::uint64_t seed) {
  const ExperimentConfig& e = config.experiment;
  ExperimentResult result;
  result.rho = e.rho;

  auto spec_for = [&](ConditionKind kind) {
    ConditionSpec c;
    c.kind = kind;
    c.rho = result.rho;
    c.trials = e.trials;
    c.training_trials = e.training_trials;
    c.participants = e.participants;
    c.seed = seed;
    c.profiles = e.profiles;
    return c;
  };

  std::optional<ConditionRun> calibration;
  if (e.calibrate_rho) {
    if (std::find(e.conditions.begin(), e.conditions.end(), ConditionKind::TomXrl) == e.conditions.end()) {
      throw ConfigError("rho calibration needs the ToM+XRL condition");
    }
    calibration = run_condition(spec_for(ConditionKind::TomXrl), config.profiles, ctx, e.threads);
    result.rho = calibration->intervention_rate();
  }
  for (ConditionKind kind : e.conditions) {
    if (kind == ConditionKind::TomXrl && calibration) {
      calibration->spec.rho = result.rho;
      result.runs.push_back(std::move(*calibration));
      calibration.reset();
    } else {
      result.runs.push_back(run_condition(spec_for(kind), config.profiles, ctx, e.threads));
    }
  }

  std::vector<RoundRecord> all;
  for (const ConditionRun& run : result.runs) {
    const auto flat = flatten(run);
    all.insert(all.end(), flat.begin(), flat.end());
  }
  result.curves = learning_curves(all);
  result.compliance = compliance_metrics(all);
  result.predictions = prediction_eval(all, *ctx.payoff, e.folds);
  result.contrast = final_trial_contrast(all, e.bootstrap_samples, derive_seed(seed, 99));
  return result;
}

void write_experiment(const ExperimentResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir / "logs");
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write " + p.string());
    return f;
  };
  std::vector<RoundRecord> all;
  json conditions = json::object();
  for (const ConditionRun& run : result.runs) {
    const auto flat = flatten(run);
    auto log = open(out_dir / "logs" / (condition_slug(run.spec.kind) + ".jsonl"));
    write_jsonl(log, flat);
    all.insert(all.end(), flat.begin(), flat.end());
    conditions[std::string(to_string(run.spec.kind))] = {{"participants", run.participants.size()},
                                                         {"rounds", run.rounds()},
                                                         {"interventions", run.interventions()},
                                                         {"intervention_rate", run.intervention_rate()},
                                                         {"rho", run.spec.rho}};
  }
  auto curves = open(out_dir / "curves.csv");
  write_curves_csv(curves, result.curves);
  auto compliance = open(out_dir / "compliance.csv");
  write_compliance_csv(compliance, result.compliance);
  auto predictions = open(out_dir / "predictions.csv");
  write_predictions_csv(predictions, result.predictions);
  auto participants = open(out_dir / "participants.csv");
  write_participants_csv(participants, participant_scores(all));

  json summary{{"rho", result.rho}, {"conditions", conditions}};
  if (result.contrast) {
    const FinalTrialContrast& c = *result.contrast;
    summary["final_trial_contrast"] = {{"trial", c.trial}, {"mean_diff", c.mean_diff}, {"ci_low", c.lo},
                                       {"ci_high", c.hi},  {"n_tom_xrl", c.n_a},       {"n_none", c.n_b}};
  }
  auto summary_file = open(out_dir / "summary.json");
  summary_file << summary.dump(2) << '\n';
}

}  // namespace tomxrl
