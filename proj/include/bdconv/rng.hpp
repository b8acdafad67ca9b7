#pragma once

#include <cstdint>
#include <random>

namespace bdconv {

// Owns one random stream. Every sampler takes an explicit Rng& so that
// chains never share state; identical seeds give identical draw sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::mt19937_64& engine() noexcept { return engine_; }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = unit_(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  // Gamma with unit rate.
  double standard_gamma(double shape) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(engine_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bdconv
