#pragma once

#include <cstdint>
#include <random>

namespace covbench::core {

// Deterministic random stream. All distribution transforms are implemented
// here rather than via std:: distributions, whose output is
// implementation-defined and would break cross-release reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int64_t uniform_int(int64_t lo, int64_t hi);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // shape-rate parameterization
  double gamma(double shape, double rate);

  double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

  // location-scale Student-t
  double student_t(double dof, double loc = 0.0, double scale = 1.0);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<int64_t>(last - first);
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = uniform_int(0, i);
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace covbench::core
