#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>

namespace qlidar {

/// Composite Simpson rule on [a, b] with n subintervals (n is rounded up to
/// an even count).
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// Golden-section minimization of a unimodal function on [lo, hi].
/// Returns the bracket midpoint once the bracket is below `tol`.
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tol) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derived seed for shard/trial `index` under base `seed`. This is the
/// documented splitting rule used by trace sampling and MLE trials: results
/// are identical no matter how work is distributed across threads.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(s);
}

/// Deterministic standard-normal generator (mt19937_64 + Box-Muller).
/// The C++ standard fixes mt19937_64 output, so sequences are reproducible
/// across platforms for a given seed.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : eng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform_open() {
    // in (0, 1]: avoids log(0) in Box-Muller
    const std::uint64_t x = eng_();
    return ((x >> 11) + 1) * 0x1.0p-53;
  }

  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qlidar
