#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ls {

// All internal math runs in double precision; checkpoints store float32.
using real = double;

// ---------------------------------------------------------------------------
// Errors. The C API and the CLI map these onto the exit-code contract
// (2 = config/usage, 3 = numeric abort, 4 = violation found).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Syntax / trace-format problems; carries a byte offset into the input.
struct ParseError : Error {
  size_t offset;
  ParseError(const std::string& msg, size_t off)
      : Error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

// ---------------------------------------------------------------------------
// Rng: deterministic across platforms. std::mt19937_64 is portable as a bit
// generator but the std distributions are not, so we implement the few
// transforms we need on top of the raw stream.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    // splitmix64-expanded state, as recommended for seeding xoshiro.
    s_[0] = splitmix64(seed);
    s_[1] = splitmix64(s_[0] ^ 0xdeadbeefcafef00dULL);
    s_[2] = splitmix64(s_[1] + 0x12345678ULL);
    s_[3] = splitmix64(s_[2] ^ seed);
  }

  // xoshiro256** core.
  uint64_t next_u64() {
    auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  real uniform() { return real(next_u64() >> 11) * 0x1.0p-53; }

  real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t bounded(uint64_t n) {
    // 128-bit multiply-shift; bias is negligible and determinism is what
    // matters here.
    return uint64_t((__uint128_t(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. The spare draw is discarded so one call
  // consumes exactly two uniforms.
  real normal() {
    real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  real normal(real mean, real stddev) { return mean + stddev * normal(); }

  bool bernoulli(real p) { return uniform() < p; }

  // Derives an independent stream keyed by `key` without touching this
  // stream's state. Used to hand each parallel unit (episode, sample, seed)
  // its own generator so results do not depend on scheduling.
  Rng split(uint64_t key) const {
    return Rng(splitmix64(s_[0] ^ splitmix64(key + 0x9e3779b97f4a7c15ULL)) ^ s_[3]);
  }

  // Draws a fresh child stream, advancing this stream once.
  Rng fork() { return Rng(splitmix64(next_u64())); }

 private:
  uint64_t s_[4];
};

inline real softplus_val(real x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline bool all_finite(const std::vector<real>& v) {
  for (real x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace ls
