#include "tomxrl/common.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace tomxrl {

std::string_view to_string(Action a) { return a == Action::Solo ? "Solo" : "Call"; }

std::optional<Action> parse_action(std::string_view s) {
  if (s == "Solo") return Action::Solo;
  if (s == "Call") return Action::Call;
  return std::nullopt;
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::BombType:
      return "bomb_type";
    case Feature::Distance:
      return "distance";
    case Feature::Time:
      return "time";
  }
  return "unknown";
}

std::optional<Feature> parse_feature(std::string_view s) {
  for (Feature f : kFeatures) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw UsageError("Rng::uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<int>(static_cast<std::int64_t>(lo) + static_cast<std::int64_t>(x % span));
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace tomxrl
