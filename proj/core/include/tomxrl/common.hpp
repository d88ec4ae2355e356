#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tomxrl {

// Errors. Configuration and data problems are runtime errors; misuse of an
// API (stepping a finished episode, looking up an unindexed state) is a
// logic error.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Action : std::uint8_t { Solo = 0, Call = 1 };
inline constexpr std::array<Action, 2> kActions{Action::Solo, Action::Call};

constexpr Action other(Action a) {
  return a == Action::Solo ? Action::Call : Action::Solo;
}
std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view s);

// The three observation features, in the fixed tie-break order.
enum class Feature : std::uint8_t { BombType = 0, Distance = 1, Time = 2 };
inline constexpr std::array<Feature, 3> kFeatures{Feature::BombType, Feature::Distance,
                                                  Feature::Time};

std::string_view to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view s);

// SplitMix64 finalizer; used to derive independent seeds for sub-streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic random source. The sampling helpers are written out rather
// than using <random> distributions so traces are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], unbiased via rejection.
  int uniform_int(int lo, int hi);

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a, for content hashes written to logs and policy metadata.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace tomxrl
