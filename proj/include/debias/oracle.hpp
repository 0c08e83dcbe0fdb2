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

#include <bit>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "debias/numtheory.hpp"
#include "debias/sampler.hpp"
#include "debias/source.hpp"

// Exact brute-force verification of the sampler's distributional and cost
// claims. Everything here runs in arbitrary-precision rational arithmetic:
// no rounding, no tolerances.

namespace debias {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Hard cap on the subset-enumeration width (2^p outcomes per table).
constexpr std::uint64_t kEnumerationBudget = 31;

inline Rational rational_pow(const Rational& base, std::uint64_t exp) {
  Rational result = 1;
  Rational b = base;
  while (exp > 0) {
    if (exp & 1) result *= b;
    b *= b;
    exp >>= 1;
  }
  return result;
}

/// Parses "num/den" or a bare integer into an exact rational.
inline Rational parse_rational(std::string_view text) {
  const auto bad = [&] {
    return std::invalid_argument("parse_rational: malformed rational '" + std::string(text) + "'");
  };
  if (text.empty()) throw bad();
  const std::size_t slash = text.find('/');
  const auto parse_int = [&](std::string_view part) {
    if (part.empty()) throw bad();
    for (const char ch : part) {
      if (ch < '0' || ch > '9') throw bad();
    }
    return BigInt(std::string(part));
  };
  if (slash == std::string_view::npos) {
    return Rational(parse_int(text));
  }
  const BigInt num = parse_int(text.substr(0, slash));
  const BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw bad();
  return Rational(num, den);
}

namespace detail {

inline void require_unit_interval(const Rational& a, const char* where) {
  if (!(a > 0 && a < 1)) {
    throw std::invalid_argument(std::string(where) + ": bias must lie strictly in (0,1)");
  }
}

inline void require_budget(std::uint64_t p, const char* where) {
  if (p > kEnumerationBudget) {
    throw std::invalid_argument(std::string(where) + ": " + std::to_string(p) +
                                " exceeds the enumeration budget (" +
                                std::to_string(kEnumerationBudget) + ")");
  }
}

inline void require_prime(std::uint64_t p, const char* where) {
  if (p < 2 || !is_prime(p)) {
    throw std::invalid_argument(std::string(where) + ": " + std::to_string(p) + " is not prime");
  }
}

// Pascal's triangle row; exact in 64 bits for n <= kEnumerationBudget.
inline std::vector<std::uint64_t> binomial_row(unsigned n) {
  std::vector<std::uint64_t> row(n + 1, 1);
  for (unsigned i = 1; i <= n; ++i) {
    for (unsigned j = i - 1; j >= 1; --j) {
      row[j] += row[j - 1];
    }
  }
  return row;
}

}  // namespace detail

/// counts[k-1][m] = number of k-element subsets of {0..width-1} whose element
/// sum is congruent to m mod width, for 1 <= k <= width-1.
struct PartitionTable {
  std::uint64_t modulus = 0;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t row_sum(unsigned k) const {
    std::uint64_t sum = 0;
    for (const std::uint64_t c : counts[k - 1]) sum += c;
    return sum;
  }
};

/// Exhaustive subset walk over {0..width-1}, any width >= 2. Subsets are
/// visited in Gray-code order so cardinality and rank sum update by a single
/// element per step.
inline PartitionTable rank_sum_table(std::uint64_t width) {
  if (width < 2) {
    throw std::invalid_argument("rank_sum_table: width must be at least 2");
  }
  detail::require_budget(width, "rank_sum_table");
  PartitionTable table;
  table.modulus = width;
  table.counts.assign(width - 1, std::vector<std::uint64_t>(width, 0));
  std::uint64_t members = 0;  // current subset as a bitmask
  std::uint64_t k = 0;
  std::uint64_t s = 0;  // rank sum mod width
  const std::uint64_t total = 1ull << width;
  for (std::uint64_t i = 1; i < total; ++i) {
    const unsigned b = static_cast<unsigned>(std::countr_zero(i));
    const std::uint64_t bit = 1ull << b;
    if (members & bit) {
      members ^= bit;
      --k;
      s = (s + width - b) % width;
    } else {
      members |= bit;
      ++k;
      s = (s + b) % width;
    }
    if (k >= 1 && k <= width - 1) {
      ++table.counts[k - 1][s];
    }
  }
  return table;
}

/// rank_sum_table gated on primality; the equipartition property the sampler
/// relies on holds only for prime widths.
inline PartitionTable enumerate_partition(std::uint64_t p) {
  detail::require_prime(p, "enumerate_partition");
  detail::require_budget(p, "enumerate_partition");
  return rank_sum_table(p);
}

namespace detail {

// Tables are pure functions of p and moderately expensive; memoize.
inline const PartitionTable& partition_table_cached(std::uint64_t p) {
  static std::mutex mu;
  static std::map<std::uint64_t, PartitionTable> cache;
  const std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(p);
  if (it == cache.end()) {
    it = cache.emplace(p, enumerate_partition(p)).first;
  }
  return it->second;
}

}  // namespace detail

struct LemmaViolation {
  unsigned k = 0;
  std::uint64_t residue = 0;
  std::uint64_t count = 0;
  std::uint64_t binomial = 0;  // C(p,k); the equipartition target is binomial / p
};

struct LemmaCheck {
  bool ok = false;
  std::optional<LemmaViolation> witness;

  explicit operator bool() const { return ok; }
};

/// Verifies by enumeration that every residue class receives exactly
/// C(p,k)/p of the k-subsets, for every 1 <= k <= p-1. Returns the first
/// offending (k, m, count) otherwise.
inline LemmaCheck check_lemma_partition(std::uint64_t p) {
  const PartitionTable table = enumerate_partition(p);
  const auto binomials = detail::binomial_row(static_cast<unsigned>(p));
  for (unsigned k = 1; k < p; ++k) {
    const std::uint64_t expected = binomials[k] / p;
    for (std::uint64_t m = 0; m < p; ++m) {
      const std::uint64_t count = table.counts[k - 1][m];
      if (binomials[k] % p != 0 || count != expected) {
        return LemmaCheck{false, LemmaViolation{k, m, count, binomials[k]}};
      }
    }
  }
  return LemmaCheck{true, std::nullopt};
}

/// Exact distribution over [0, n): nonnegative rationals summing to 1.
struct ExactDist {
  std::vector<Rational> probs;

  Rational total() const {
    Rational sum = 0;
    for (const Rational& q : probs) sum += q;
    return sum;
  }

  bool is_uniform() const {
    if (probs.empty()) return false;
    const Rational expected(1, static_cast<BigInt>(probs.size()));
    for (const Rational& q : probs) {
      if (q != expected) return false;
    }
    return true;
  }
};

/// Conditional distribution of the accepted-round value of the prime-stage
/// sampler, computed from the partition table and the exact round weights
/// a^k b^{p-k} without assuming the equipartition result.
inline ExactDist exact_prime_dist(std::uint64_t p, const Rational& a) {
  detail::require_prime(p, "exact_prime_dist");
  detail::require_budget(p, "exact_prime_dist");
  detail::require_unit_interval(a, "exact_prime_dist");
  const PartitionTable& table = detail::partition_table_cached(p);
  const Rational b = 1 - a;
  std::vector<Rational> weights(p);  // weights[k] = a^k b^{p-k}, 1 <= k <= p-1
  for (std::uint64_t k = 1; k < p; ++k) {
    weights[k] = rational_pow(a, k) * rational_pow(b, p - k);
  }
  ExactDist dist;
  dist.probs.assign(p, Rational(0));
  Rational denom = 0;
  for (std::uint64_t k = 1; k < p; ++k) {
    for (std::uint64_t m = 0; m < p; ++m) {
      const Rational mass = table.counts[k - 1][m] * weights[k];
      dist.probs[m] += mass;
      denom += mass;
    }
  }
  for (Rational& q : dist.probs) q /= denom;
  return dist;
}

/// Product-composes per-stage conditional distributions through the digit
/// decomposition, for an explicit stage order. Every radix must be prime and
/// within the enumeration budget.
inline ExactDist exact_composite_dist_ordered(std::span<const std::uint64_t> radices,
                                              const Rational& a) {
  detail::require_unit_interval(a, "exact_composite_dist_ordered");
  constexpr std::uint64_t kMaxEntries = 1'000'000;
  std::uint64_t n = 1;
  std::map<std::uint64_t, ExactDist> stage_dists;
  for (const std::uint64_t r : radices) {
    if (!stage_dists.count(r)) {
      stage_dists.emplace(r, exact_prime_dist(r, a));
    }
    n *= r;
    if (n > kMaxEntries) {
      throw std::invalid_argument(
          "exact_composite_dist_ordered: product of radices exceeds the table budget");
    }
  }
  ExactDist dist;
  dist.probs.assign(n, Rational(0));
  for (std::uint64_t m = 0; m < n; ++m) {
    const std::vector<std::uint64_t> digits = decompose_value(radices, m);
    Rational prob = 1;
    for (std::size_t i = 0; i < radices.size(); ++i) {
      prob *= stage_dists.at(radices[i]).probs[digits[i]];
    }
    dist.probs[m] = prob;
  }
  return dist;
}

/// Exact output distribution of the composed sampler on [0, n), stages in
/// the canonical nondecreasing factor order. n = 1 is the point mass at 0.
inline ExactDist exact_composite_dist(std::uint64_t n, const Rational& a) {
  if (n == 0) {
    throw std::invalid_argument("exact_composite_dist: n must be positive");
  }
  detail::require_unit_interval(a, "exact_composite_dist");
  const std::vector<std::uint64_t> radices = factorize(n).expand_multiset();
  return exact_composite_dist_ordered(radices, a);
}

/// Expected flips to finish one prime stage: p / (1 - a^p - b^p), exact.
inline Rational expected_flips_prime(std::uint64_t p, const Rational& a) {
  detail::require_prime(p, "expected_flips_prime");
  detail::require_unit_interval(a, "expected_flips_prime");
  const Rational b = 1 - a;
  return Rational(p) / (1 - rational_pow(a, p) - rational_pow(b, p));
}

/// Expected flips to finish the composed sampler: the stage sum
/// sum_i t_i * p_i / (1 - a^{p_i} - b^{p_i}), exact.
inline Rational expected_flips_composite(std::uint64_t n, const Rational& a) {
  if (n < 2) {
    throw std::invalid_argument("expected_flips_composite: n must be at least 2");
  }
  detail::require_unit_interval(a, "expected_flips_composite");
  Rational sum = 0;
  for (const auto& [p, t] : factorize(n).factors) {
    sum += t * expected_flips_prime(p, a);
  }
  return sum;
}

struct ResidueCheck {
  bool rejection_equivalence = false;  // all-equal rounds coincide with zero residue sums
  bool uniform = false;                // conditional residue-weighted sum is uniform 1/p
  ExactDist dist;

  bool ok() const { return rejection_equivalence && uniform; }
  explicit operator bool() const { return ok(); }
};

/// Recasts a round as values in Z_p (Head = residue 1, Tail = residue 0) and
/// verifies, outcome by outcome over {0,1}^p: (a) a round is all Heads or all
/// Tails exactly when the residue sum of its flips is zero, and (b) the
/// residue-weighted sum  sum_i i * x_i  conditioned on a nonzero residue sum
/// is uniform on Z_p. Enumerates directly per outcome, independently of the
/// partition-table route.
inline ResidueCheck check_residue_equivalence(std::uint64_t p, const Rational& a) {
  detail::require_prime(p, "check_residue_equivalence");
  detail::require_budget(p, "check_residue_equivalence");
  detail::require_unit_interval(a, "check_residue_equivalence");
  const Rational b = 1 - a;
  std::vector<Rational> weights(p + 1);  // outcome weight by head count
  for (std::uint64_t k = 0; k <= p; ++k) {
    weights[k] = rational_pow(a, k) * rational_pow(b, p - k);
  }
  // accepted[k][r] = outcomes with k Heads and residue-weighted sum r
  std::vector<std::vector<std::uint64_t>> accepted(p + 1, std::vector<std::uint64_t>(p, 0));
  bool equivalence = true;
  const std::uint64_t total = 1ull << p;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    std::uint64_t k = 0;
    std::uint64_t r = 0;
    for (std::uint64_t rest = mask; rest != 0; rest &= rest - 1) {
      ++k;
      r += static_cast<std::uint64_t>(std::countr_zero(rest));
    }
    r %= p;
    const bool all_equal = mask == 0 || mask == total - 1;
    const bool residue_sum_zero = k % p == 0;
    if (all_equal != residue_sum_zero) {
      equivalence = false;
    }
    if (!residue_sum_zero) {
      ++accepted[k][r];
    }
  }
  ResidueCheck check;
  check.rejection_equivalence = equivalence;
  check.dist.probs.assign(p, Rational(0));
  Rational denom = 0;
  for (std::uint64_t k = 0; k <= p; ++k) {
    for (std::uint64_t r = 0; r < p; ++r) {
      if (accepted[k][r] == 0) continue;
      const Rational mass = accepted[k][r] * weights[k];
      check.dist.probs[r] += mass;
      denom += mass;
    }
  }
  for (Rational& q : check.dist.probs) q /= denom;
  const Rational uniform(1, static_cast<BigInt>(p));
  check.uniform = true;
  for (const Rational& q : check.dist.probs) {
    if (q != uniform) {
      check.uniform = false;
      break;
    }
  }
  return check;
}

/// Observed counts and mean flip cost from seeded Monte-Carlo runs of the
/// composed sampler. Deterministic for a fixed (n, bias, trials, seed).
struct EmpiricalResult {
  std::vector<std::uint64_t> counts;
  std::uint64_t trials = 0;
  std::uint64_t total_flips = 0;
  std::optional<double> mean_flips;
};

inline EmpiricalResult empirical_dist(std::uint64_t n, BiasParams bias, std::uint64_t trials,
                                      std::uint64_t seed, const SamplerConfig& cfg = {}) {
  if (n == 0) {
    throw std::invalid_argument("empirical_dist: n must be positive");
  }
  EmpiricalResult result;
  result.counts.assign(n, 0);
  result.trials = trials;
  BiasedCoin src = simulated_source(bias, seed);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const SampleReport report = sample_uniform(n, src, cfg);
    ++result.counts[report.value];
    result.total_flips += report.flips_consumed;
  }
  if (trials > 0) {
    result.mean_flips = static_cast<double>(result.total_flips) / static_cast<double>(trials);
  }
  return result;
}

}  // namespace debias
