#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sarfsl {

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

/// Seeded random stream. Every stochastic routine in the library takes one of
/// these explicitly; there is no global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix_seed(seed)) {}

  double uniform() { return canonical_(engine_); }
  double uniform(double lo, double hi) {
    return lo == hi ? lo : lo + (hi - lo) * canonical_(engine_);
  }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }
  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && canonical_(engine_) < p); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  /// Child stream that does not perturb this one's future draws beyond the
  /// single value consumed.
  Rng fork() { return Rng(next_u64()); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> canonical_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

}  // namespace sarfsl
