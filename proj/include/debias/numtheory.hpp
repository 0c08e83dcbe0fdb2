/* Copyright 2026 The debias Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace debias {

namespace detail {

inline std::uint64_t mul_mod(std::uint64_t x, std::uint64_t y, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * y) % m);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Returns true when a is a Miller-Rabin witness certifying n composite.
// n must be odd and > 2.
inline bool mr_witness(std::uint64_t n, std::uint64_t a) {
  const int r = std::countr_zero(n - 1);
  const std::uint64_t d = (n - 1) >> r;
  std::uint64_t x = pow_mod(a, d, n);
  if (x == 1 || x == n - 1) return false;
  for (int i = 1; i < r; ++i) {
    x = mul_mod(x, x, n);
    if (x == n - 1) return false;
  }
  return true;
}

}  // namespace detail

/// Deterministic primality over the full 64-bit range: trial division by
/// small primes, then Miller-Rabin with the fixed witness set
/// {2,3,5,7,11,13,17,19,23,29,31,37}, which is exact for every n < 3.3e24.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  if (n < 41 * 41) return true;
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (detail::mr_witness(n, a)) return false;
  }
  return true;
}

/// Canonical prime factorization: strictly increasing primes with positive
/// multiplicities whose product recomposes n exactly. n = 1 has no factors.
struct PrimeFactorization {
  std::uint64_t n = 1;
  std::vector<std::pair<std::uint64_t, unsigned>> factors;

  /// The factor multiset: each prime repeated by its multiplicity, nondecreasing.
  std::vector<std::uint64_t> expand_multiset() const {
    std::vector<std::uint64_t> out;
    for (const auto& [p, t] : factors) {
      out.insert(out.end(), t, p);
    }
    return out;
  }
};

namespace detail {

constexpr std::uint64_t kTrialDivisionLimit = 1'000'000;

// Deterministic Pollard rho (Floyd cycle detection, incrementing polynomial
// offset on failure). Requires n odd, composite, with no factor below the
// trial-division limit; always returns a nontrivial divisor.
inline std::uint64_t pollard_rho(std::uint64_t n) {
  for (std::uint64_t c = 1;; ++c) {
    auto step = [&](std::uint64_t x) {
      return static_cast<std::uint64_t>(
          (static_cast<unsigned __int128>(mul_mod(x, x, n)) + c) % n);
    };
    std::uint64_t x = 2, y = 2, d = 1;
    while (d == 1) {
      x = step(x);
      y = step(step(y));
      d = std::gcd(x > y ? x - y : y - x, n);
    }
    if (d != n) return d;
  }
}

inline void factor_recurse(std::uint64_t n, std::vector<std::uint64_t>& out) {
  if (n == 1) return;
  if (is_prime(n)) {
    out.push_back(n);
    return;
  }
  const std::uint64_t d = pollard_rho(n);
  factor_recurse(d, out);
  factor_recurse(n / d, out);
}

}  // namespace detail

/// Factors any 64-bit n >= 1: trial division up to 10^6, Pollard rho beyond.
inline PrimeFactorization factorize(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("factorize: n must be positive");
  }
  PrimeFactorization result;
  result.n = n;
  std::vector<std::uint64_t> primes;
  while (n % 2 == 0) {
    primes.push_back(2);
    n /= 2;
  }
  for (std::uint64_t d = 3; d <= detail::kTrialDivisionLimit && d * d <= n; d += 2) {
    while (n % d == 0) {
      primes.push_back(d);
      n /= d;
    }
  }
  detail::factor_recurse(n, primes);
  std::sort(primes.begin(), primes.end());
  for (const std::uint64_t p : primes) {
    if (!result.factors.empty() && result.factors.back().first == p) {
      ++result.factors.back().second;
    } else {
      result.factors.emplace_back(p, 1u);
    }
  }
  return result;
}

/// c(n): the sum of prime factors of n counted with multiplicity. Tracks the
/// expected flip count of the composed sampler up to the per-prime rejection
/// factor; equals n exactly when n is prime.
inline std::uint64_t cost_c(std::uint64_t n) {
  if (n < 2) {
    throw std::invalid_argument("cost_c: n must be at least 2");
  }
  std::uint64_t sum = 0;
  for (const auto& [p, t] : factorize(n).factors) {
    sum += p * t;
  }
  return sum;
}

struct SublinearityResult {
  std::uint64_t satisfying = 0;  // |{2 <= n <= N : c(n) < n / log^{1-eps}(n)}|
  std::uint64_t total = 0;       // N - 1

  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(satisfying) / static_cast<double>(total);
  }
};

/// Exhaustively factors every n in [2, N] (smallest-prime-factor sieve) and
/// counts how often c(n) falls below n / log^{1-eps}(n). Memory is O(N).
inline SublinearityResult sublinearity_fraction(std::uint64_t limit, double epsilon) {
  if (limit < 2) {
    throw std::invalid_argument("sublinearity_fraction: limit must be at least 2");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("sublinearity_fraction: epsilon must lie in (0,1)");
  }
  if (limit > (1ull << 31)) {
    throw std::invalid_argument("sublinearity_fraction: limit exceeds the sieve budget (2^31)");
  }
  const std::size_t n = static_cast<std::size_t>(limit);
  std::vector<std::uint32_t> spf(n + 1, 0);
  for (std::size_t i = 2; i <= n; ++i) {
    if (spf[i] == 0) {
      for (std::size_t j = i; j <= n; j += i) {
        if (spf[j] == 0) spf[j] = static_cast<std::uint32_t>(i);
      }
    }
  }
  std::vector<std::uint64_t> c(n + 1, 0);
  SublinearityResult result;
  result.total = limit - 1;
  const double exponent = 1.0 - epsilon;
  for (std::size_t i = 2; i <= n; ++i) {
    c[i] = spf[i] + c[i / spf[i]];
    const double threshold =
        static_cast<double>(i) / std::pow(std::log(static_cast<double>(i)), exponent);
    if (static_cast<double>(c[i]) < threshold) {
      ++result.satisfying;
    }
  }
  return result;
}

}  // namespace debias
