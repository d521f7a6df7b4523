#pragma once

#include "crtb/numkernel.hpp"
#include "crtb/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace crtb {

// splitmix64 step (Steele, Lea, Vigna). Used only to derive well-separated
// substream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t state = master ^ (0x6a09e667f3bcc909ULL + stream);
  std::uint64_t out = splitmix64(state);
  out ^= splitmix64(state);
  return out;
}

// Seeded source of reproducible draws. The engine (mt19937_64) is fully
// specified by the standard and every distribution below is implemented here,
// so identical seeds give identical streams on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF; deterministic by construction.
  double normal() { return normal_quantile(uniform01()); }

  // Uniform integer in [0, n), Lemire rejection scheme (unbiased).
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    unsigned __int128 m =
        static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n);
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(gen_()) *
            static_cast<unsigned __int128>(n);
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Poisson via Knuth's product-of-uniforms method; intended for small means
  // (the contamination mechanism never needs a mean above ~40).
  int poisson(double mean) {
    require(mean >= 0.0, "Rng::poisson: mean must be nonnegative");
    if (mean == 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= uniform01();
    } while (prod > limit);
    return k - 1;
  }

  // k distinct indices from [0, n), partial Fisher-Yates, selection order.
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    require(k >= 0 && k <= n, "Rng::sample_without_replacement: need 0<=k<=n");
    std::vector<Index> pool(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    std::vector<Index> out;
    out.reserve(static_cast<size_t>(k));
    for (Index i = 0; i < k; ++i) {
      const auto j =
          i + static_cast<Index>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
      out.push_back(pool[static_cast<size_t>(i)]);
    }
    return out;
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    // Row-major fill order is part of the documented stream layout.
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace crtb
