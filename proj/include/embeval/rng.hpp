// embeval/rng.hpp

// Copyright 2026  The embeval authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMBEVAL_RNG_HPP_
#define EMBEVAL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "embeval/error.hpp"
#include "embeval/util.hpp"

namespace embeval {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a label; used so
// that per-work-unit randomness does not depend on scheduling order.
inline uint64_t derive_seed(uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a64(label));
}

// Seeded generator with distributions implemented by hand.  The standard
// library leaves distribution algorithms unspecified, so results would not
// be reproducible across toolchains; mt19937_64 itself is fully specified.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t u64() { return gen_(); }

  // Unbiased integer in [0, n).
  uint64_t index(uint64_t n) {
    if (n == 0) throw NumericError("Rng::index with n = 0");
    uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % n + 1) % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x > limit);
    return x % n;
  }

  int64_t int_range(int64_t lo, int64_t hi) {  // inclusive bounds
    return lo + static_cast<int64_t>(index(static_cast<uint64_t>(hi - lo + 1)));
  }

  // [0, 1), 53-bit resolution.
  double real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double real(double lo, double hi) { return lo + (hi - lo) * real(); }

  // Standard normal via Box-Muller; the spare value is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.  Uses rejection when k is
  // small relative to n, a partial Fisher-Yates otherwise.
  std::vector<int64_t> sample_indices(int64_t n, int64_t k) {
    if (k > n) throw NumericError("sample_indices: k > n");
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(k));
    if (k * 4 <= n) {
      std::unordered_set<int64_t> seen;
      while (static_cast<int64_t>(out.size()) < k) {
        int64_t x = static_cast<int64_t>(index(static_cast<uint64_t>(n)));
        if (seen.insert(x).second) out.push_back(x);
      }
    } else {
      std::vector<int64_t> pool(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
      for (int64_t i = 0; i < k; ++i) {
        int64_t j = i + static_cast<int64_t>(index(static_cast<uint64_t>(n - i)));
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        out.push_back(pool[static_cast<size_t>(i)]);
      }
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace embeval

#endif  // EMBEVAL_RNG_HPP_
