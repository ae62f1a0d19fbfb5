#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace slogan {

// Seeded pseudo-random source. Conversions from raw engine output are done
// here rather than through <random> distributions so the draw sequence only
// depends on mt19937_64, which the standard pins exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::size_t below(std::size_t n);

  // Inclusive integer range.
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal();

  std::vector<std::size_t> permutation(std::size_t n);

  // Uniform permutation with no fixed points when n >= 2 (rejection on a
  // shuffled candidate, expected ~e tries). For n == 1 returns {0}.
  std::vector<std::size_t> derangement(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slogan
