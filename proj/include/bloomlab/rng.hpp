#pragma once

// Seeded, splittable random numbers. Child streams are derived from
// (master seed, stream tag, index) so results never depend on the order in
// which trials are scheduled. The floating-point conversions are spelled
// out here so output is identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bloomlab {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  static Rng split(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(master ^ splitmix64(stream)) + index));
  }

  std::uint64_t next() { return eng_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double sign() { return (eng_() >> 63) ? 1.0 : -1.0; }
  int below(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace bloomlab
