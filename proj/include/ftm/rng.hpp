#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace ftm {

// splitmix64 finalizer, used to spread seeds and labels over 64 bits
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every random decision in the project derives its stream from one user seed
// plus a purpose label (and optionally an index), so independent consumers
// never share state and runs reproduce exactly.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(base);
  for (char ch : label) h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001b3ULL;
  return mix64(h ^ mix64(index));
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view label,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(base, label, index));
}

// uniform in [0,1); hand-rolled instead of std::uniform_real_distribution,
// whose algorithm is implementation-defined and would break cross-toolchain
// reproducibility
inline double next_double(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double next_uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * next_double(g);
}

// unbiased draw from [0, n) by rejection
inline std::uint64_t next_index(std::mt19937_64& g, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_index: n must be positive");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

// Box-Muller without state, one normal per two uniforms
inline double next_gaussian(std::mt19937_64& g) {
  const double u1 = 1.0 - next_double(g);
  const double u2 = next_double(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_index(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices from [0, n), returned ascending so downstream tie-breaks
// on original index stay stable regardless of draw order
inline std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& g) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(next_index(g, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<int> sample_with_replacement(int n, int k, std::mt19937_64& g) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = static_cast<int>(next_index(g, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace ftm
