#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace sticky {

// 64-bit state generator; cheap enough to keep one per coordinate.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

using Rng = std::mt19937_64;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
  g();
  return g();
}

// Uniform on the open interval (0, 1).
template <class G>
double uniform_open(G& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

template <class G>
double std_exponential(G& g) {
  return -std::log(uniform_open(g));
}

template <class G>
double std_normal(G& g) {
  // Box-Muller without caching, so the number of draws consumed is fixed.
  double u1 = uniform_open(g);
  double u2 = uniform_open(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <class G>
bool bernoulli(G& g, double p) {
  return uniform_open(g) < p;
}

template <class G>
std::size_t uniform_index(G& g, std::size_t n) {
  return static_cast<std::size_t>(uniform_open(g) * static_cast<double>(n)) % n;
}

// A main stream plus one independent stream per coordinate. Coordinate
// streams make clock draws independent of the order in which an
// implementation visits coordinates.
class RandomStreams {
 public:
  RandomStreams(std::uint64_t seed, std::size_t d) : main_(derive_seed(seed, 0)) {
    coord_.reserve(d);
    for (std::size_t i = 0; i < d; ++i) coord_.emplace_back(derive_seed(seed, i + 1));
  }

  Rng& main() { return main_; }
  SplitMix64& coord(std::size_t i) { return coord_[i]; }

 private:
  Rng main_;
  std::vector<SplitMix64> coord_;
};

}  // namespace sticky
