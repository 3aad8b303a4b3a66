#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>

#include "twophase/errors.hpp"

namespace twophase {

// Identifies one logical random stream. Streams are keyed, not sequential:
// replicate k draws from (seed, domain, k, 0), imputation m within k from
// (seed, domain, k, m), so results do not depend on scheduling order.
struct StreamId {
  std::uint64_t seed = 0, domain = 0, k = 0, m = 0;
  bool operator==(const StreamId&) const = default;
};

namespace stream_domain {
inline constexpr std::uint64_t cohort = 1;
inline constexpr std::uint64_t sample = 2;
inline constexpr std::uint64_t impute_mi = 3;
inline constexpr std::uint64_t impute_mir = 4;
inline constexpr std::uint64_t gof = 5;
inline constexpr std::uint64_t mp_null = 6;
inline constexpr std::uint64_t mp_tie = 7;
inline constexpr std::uint64_t oracle = 8;
inline constexpr std::uint64_t test = 99;
}  // namespace stream_domain

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with state derived from the stream id via splitmix64.
class RngStream {
 public:
  explicit RngStream(StreamId id) : id_(id) {
    std::uint64_t key = id.seed;
    key = splitmix64(key) ^ (id.domain * 0xd1342543de82ef95ULL);
    key = splitmix64(key) ^ (id.k * 0x9e6c63d0876a9dd1ULL);
    key = splitmix64(key) ^ (id.m * 0xc2b2ae3d27d4eb4fULL);
    for (auto& s : state_) s = splitmix64(key);
    if (registry_hook()) registry_hook()(id_);
  }
  RngStream(std::uint64_t seed, std::uint64_t domain, std::uint64_t k = 0, std::uint64_t m = 0)
      : RngStream(StreamId{seed, domain, k, m}) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform on (0,1)
  double uniform01() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // unbiased integer in [0, n)
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw InvalidInput("uniform_index: n must be positive");
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t v = next_u64();
    while (v > bound) v = next_u64();
    return static_cast<std::size_t>(v % n);
  }

  // Marsaglia-Tsang; mean shape/rate
  double gamma(double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0) throw InvalidInput("gamma: shape and rate must be positive");
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  // inverse-gamma(shape a, scale b): mean b/(a-1)
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

  const StreamId& id() const { return id_; }

  // optional bookkeeping hook; tests install it to assert no stream reuse
  static std::function<void(const StreamId&)>& registry_hook() {
    static std::function<void(const StreamId&)> hook;
    return hook;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int s) { return (x << s) | (x >> (64 - s)); }
  std::array<std::uint64_t, 4> state_{};
  StreamId id_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace twophase
