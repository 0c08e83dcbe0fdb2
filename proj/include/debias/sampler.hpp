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

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "debias/numtheory.hpp"
#include "debias/source.hpp"

namespace debias {

/// One round of flips, analyzed. head_count is the number of Heads, rank_sum
/// the sum of their 0-based positions; a round is rejected exactly when it is
/// all Heads or all Tails. rank_sum is exact for round lengths below 2^32.
struct RoundOutcome {
  std::vector<Flip> flips;
  std::uint64_t head_count = 0;
  std::uint64_t rank_sum = 0;
  bool rejected = false;

  static RoundOutcome from_flips(std::vector<Flip> round) {
    RoundOutcome out;
    for (std::size_t i = 0; i < round.size(); ++i) {
      if (round[i] == Flip::Head) {
        ++out.head_count;
        out.rank_sum += i;
      }
    }
    out.rejected = out.head_count == 0 || out.head_count == round.size();
    out.flips = std::move(round);
    return out;
  }
};

/// Telemetry for one prime stage: how many rounds were rejected before the
/// accepted one, and the flips per round (always the stage prime, since a
/// round is consumed whole).
struct StageReport {
  std::uint64_t prime = 0;
  std::uint64_t rejected_rounds = 0;
  std::uint64_t accepted_round_flips = 0;
};

/// A drawn value plus the flips spent on it.
/// flips_consumed == sum over stages of (rejected_rounds + 1) * prime.
struct SampleReport {
  std::uint64_t value = 0;
  std::uint64_t flips_consumed = 0;
  std::vector<StageReport> stages;
};

/// When max_rounds_per_stage is unset, the rejection loop is unbounded; it
/// terminates with probability 1 for any bias strictly inside (0,1).
struct SamplerConfig {
  std::optional<std::uint64_t> max_rounds_per_stage;
};

class RoundCapExceeded : public std::runtime_error {
 public:
  RoundCapExceeded(std::uint64_t stage_prime, std::uint64_t rounds, std::uint64_t flips,
                   std::uint64_t stages)
      : std::runtime_error("round cap exceeded: " + std::to_string(rounds) +
                           " rounds rejected at stage prime " + std::to_string(stage_prime)),
        prime(stage_prime),
        rounds_attempted(rounds),
        flips_consumed(flips),
        stages_completed(stages) {}

  std::uint64_t prime;
  std::uint64_t rounds_attempted;
  std::uint64_t flips_consumed;
  std::uint64_t stages_completed;
};

namespace detail {

inline std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) + b) % m);
}

struct StageOutcome {
  std::uint64_t value = 0;
  StageReport report;
};

// Rejection-samples one uniform value in [0, p): consume p flips, reject
// all-Heads/all-Tails rounds whole, return the rank sum of Heads mod p.
// flips_total accumulates across stages so interruptions carry a cumulative
// count; stages_done tags interruptions with how many stages finished.
template <BitSource S>
StageOutcome sample_prime_stage(std::uint64_t p, S& src, const SamplerConfig& cfg,
                                std::uint64_t& flips_total, std::uint64_t stages_done) {
  std::uint64_t rejected = 0;
  for (std::uint64_t round = 0;; ++round) {
    if (cfg.max_rounds_per_stage && round >= *cfg.max_rounds_per_stage) {
      throw RoundCapExceeded(p, round, flips_total, stages_done);
    }
    std::uint64_t heads = 0;
    std::uint64_t rank_sum = 0;  // kept reduced mod p
    for (std::uint64_t i = 0; i < p; ++i) {
      Flip f;
      try {
        f = src.next();
      } catch (const SourceExhausted&) {
        throw SourceExhausted(flips_total, stages_done);
      }
      ++flips_total;
      if (f == Flip::Head) {
        ++heads;
        rank_sum = add_mod(rank_sum, i, p);
      }
    }
    if (heads == 0 || heads == p) {
      ++rejected;
      continue;
    }
    return StageOutcome{rank_sum, StageReport{p, rejected, p}};
  }
}

}  // namespace detail

/// Von Neumann's coin debiaser: flip twice, discard HH/TT pairs, map HT to 0
/// and TH to 1. The result is exactly fair for any unknown bias in (0,1).
template <BitSource S>
SampleReport sample_von_neumann(S& src, const SamplerConfig& cfg = {}) {
  std::uint64_t flips = 0;
  std::uint64_t rejected = 0;
  for (std::uint64_t round = 0;; ++round) {
    if (cfg.max_rounds_per_stage && round >= *cfg.max_rounds_per_stage) {
      throw RoundCapExceeded(2, round, flips, 0);
    }
    Flip pair[2];
    for (Flip& f : pair) {
      try {
        f = src.next();
      } catch (const SourceExhausted&) {
        throw SourceExhausted(flips, 0);
      }
      ++flips;
    }
    if (pair[0] == pair[1]) {
      ++rejected;
      continue;
    }
    const std::uint64_t value = pair[0] == Flip::Head ? 0 : 1;
    return SampleReport{value, flips, {StageReport{2, rejected, 2}}};
  }
}

/// Uniform sampling on [0, p) for prime p: rounds of p flips, all-Heads and
/// all-Tails rounds rejected whole, accepted rounds return the rank sum of
/// Heads mod p. For p = 2 this is flip-for-flip the Von Neumann debiaser.
template <BitSource S>
SampleReport sample_prime(std::uint64_t p, S& src, const SamplerConfig& cfg = {}) {
  if (p < 2 || !is_prime(p)) {
    throw std::invalid_argument("sample_prime: " + std::to_string(p) + " is not prime");
  }
  SampleReport report;
  const auto stage = detail::sample_prime_stage(p, src, cfg, report.flips_consumed, 0);
  report.value = stage.value;
  report.stages.push_back(stage.report);
  return report;
}

/// Uniform sampling on [0, n) for any positive 64-bit n: one prime stage per
/// entry of the factor multiset of n, processed in nondecreasing order, each
/// stage digit weighted by the product of the radices still to come.
/// n = 1 draws nothing and returns 0.
template <BitSource S>
SampleReport sample_uniform(std::uint64_t n, S& src, const SamplerConfig& cfg = {}) {
  if (n == 0) {
    throw std::invalid_argument("sample_uniform: n must be positive");
  }
  SampleReport report;
  if (n == 1) {
    return report;
  }
  const std::vector<std::uint64_t> radices = factorize(n).expand_multiset();
  std::uint64_t remaining = n;
  for (const std::uint64_t prime : radices) {
    remaining /= prime;
    const auto stage =
        detail::sample_prime_stage(prime, src, cfg, report.flips_consumed, report.stages.size());
    report.value += stage.value * remaining;
    report.stages.push_back(stage.report);
  }
  return report;
}

namespace detail {

inline std::uint64_t radices_product(std::span<const std::uint64_t> radices) {
  std::uint64_t product = 1;
  for (const std::uint64_t r : radices) product *= r;
  return product;
}

}  // namespace detail

/// Inverse of the stage accumulation over an explicit radix sequence: the
/// unique digit tuple with m = sum of digit * (product of later radices).
inline std::vector<std::uint64_t> decompose_value(std::span<const std::uint64_t> radices,
                                                  std::uint64_t m) {
  std::uint64_t remaining = detail::radices_product(radices);
  if (m >= remaining) {
    throw std::invalid_argument("decompose_value: m must lie in [0, n)");
  }
  std::vector<std::uint64_t> digits;
  digits.reserve(radices.size());
  for (const std::uint64_t radix : radices) {
    remaining /= radix;
    digits.push_back(m / remaining);
    m %= remaining;
  }
  return digits;
}

/// Digit tuple over the factor multiset of n in nondecreasing order.
inline std::vector<std::uint64_t> decompose_value(std::uint64_t n, std::uint64_t m) {
  if (n == 0) {
    throw std::invalid_argument("decompose_value: n must be positive");
  }
  if (m >= n) {
    throw std::invalid_argument("decompose_value: m must lie in [0, n)");
  }
  const std::vector<std::uint64_t> radices = factorize(n).expand_multiset();
  return decompose_value(radices, m);
}

/// Stage accumulation over an explicit radix sequence; inverse of
/// decompose_value on the same sequence.
inline std::uint64_t compose_digits(std::span<const std::uint64_t> radices,
                                    std::span<const std::uint64_t> digits) {
  if (digits.size() != radices.size()) {
    throw std::invalid_argument("compose_digits: digit count does not match the radices");
  }
  std::uint64_t remaining = detail::radices_product(radices);
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < radices.size(); ++i) {
    if (digits[i] >= radices[i]) {
      throw std::invalid_argument("compose_digits: digit exceeds its radix");
    }
    remaining /= radices[i];
    value += digits[i] * remaining;
  }
  return value;
}

/// Stage accumulation over the factor multiset of n in nondecreasing order.
inline std::uint64_t compose_digits(std::uint64_t n, std::span<const std::uint64_t> digits) {
  if (n == 0) {
    throw std::invalid_argument("compose_digits: n must be positive");
  }
  const std::vector<std::uint64_t> radices = factorize(n).expand_multiset();
  return compose_digits(radices, digits);
}

}  // namespace debias
