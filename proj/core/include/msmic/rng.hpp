#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace msmic {

// Per-replication seed stream: rep r uses mix_seed(seed, r). The increment is
// the 64-bit golden ratio and the finalizer is splitmix64, so nearby counters
// land on uncorrelated engine seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// mt19937_64 plus explicit transforms. The standard distributions are not
// bit-reproducible across standard libraries, so the few we need are spelled
// out here; given a seed the stream is identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform on (0,1), endpoints excluded
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; caches the paired deviate
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // inverse-CDF draw from a probability vector (assumed to sum to 1)
  int categorical(const Eigen::VectorXd& probs) {
    const double u = uniform();
    double cum = 0.0;
    for (int h = 0; h < probs.size(); ++h) {
      cum += probs[h];
      if (u < cum) return h;
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Neumaier compensated summation; replication aggregates use it so that
// results do not depend on how work was split across threads.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace msmic
