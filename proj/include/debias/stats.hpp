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
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "debias/sampler.hpp"

namespace debias {

struct ChiSquareResult {
  double statistic = 0.0;
  unsigned dof = 0;
  double critical_999 = 0.0;  // 99.9% quantile of chi-square with dof degrees of freedom
  bool pass = false;          // statistic < critical_999
};

/// 99.9% chi-square quantile: exact values for dof 1 and 2, Wilson-Hilferty
/// approximation above.
inline double chi_square_critical_999(unsigned dof) {
  if (dof == 0) {
    throw std::invalid_argument("chi_square_critical_999: dof must be positive");
  }
  if (dof == 1) return 10.827566170662733;
  if (dof == 2) return 13.815510557964274;
  constexpr double z999 = 3.090232306167813;  // standard normal 99.9% quantile
  const double d = static_cast<double>(dof);
  const double term = 1.0 - 2.0 / (9.0 * d) + z999 * std::sqrt(2.0 / (9.0 * d));
  return d * term * term * term;
}

/// Pearson goodness-of-fit against the uniform null over the given buckets.
/// Requires at least 2 buckets and an expected count of at least 5 per bucket.
inline ChiSquareResult chi_square_uniform(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) {
    throw std::invalid_argument("chi_square_uniform: need at least 2 buckets");
  }
  std::uint64_t trials = 0;
  for (const std::uint64_t c : counts) trials += c;
  if (trials == 0) {
    throw std::invalid_argument("chi_square_uniform: no observations");
  }
  const double expected = static_cast<double>(trials) / static_cast<double>(counts.size());
  if (expected < 5.0) {
    throw std::invalid_argument("chi_square_uniform: expected count per bucket is " +
                                std::to_string(expected) + " (< 5) across " +
                                std::to_string(counts.size()) + " buckets");
  }
  ChiSquareResult result;
  result.dof = static_cast<unsigned>(counts.size() - 1);
  for (const std::uint64_t c : counts) {
    const double diff = static_cast<double>(c) - expected;
    result.statistic += diff * diff / expected;
  }
  result.critical_999 = chi_square_critical_999(result.dof);
  result.pass = result.statistic < result.critical_999;
  return result;
}

/// Per-prime rejection accounting aggregated across stage instances.
struct StageCost {
  std::uint64_t prime = 0;
  std::uint64_t rejected_rounds = 0;
  std::uint64_t total_rounds = 0;
  double rejection_rate = 0.0;  // compare against a^p + b^p
};

struct FlipCostSummary {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  std::vector<StageCost> stages;
};

inline FlipCostSummary flip_cost_summary(std::span<const SampleReport> reports) {
  if (reports.empty()) {
    throw std::invalid_argument("flip_cost_summary: no reports");
  }
  FlipCostSummary summary;
  summary.min = reports.front().flips_consumed;
  summary.max = reports.front().flips_consumed;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> per_prime;  // rejected, total
  for (const SampleReport& report : reports) {
    const double f = static_cast<double>(report.flips_consumed);
    sum += f;
    sum_sq += f * f;
    summary.min = std::min(summary.min, report.flips_consumed);
    summary.max = std::max(summary.max, report.flips_consumed);
    for (const StageReport& stage : report.stages) {
      auto& [rejected, total] = per_prime[stage.prime];
      rejected += stage.rejected_rounds;
      total += stage.rejected_rounds + 1;
    }
  }
  const double count = static_cast<double>(reports.size());
  summary.mean = sum / count;
  summary.variance = sum_sq / count - summary.mean * summary.mean;
  for (const auto& [prime, rounds] : per_prime) {
    StageCost cost;
    cost.prime = prime;
    cost.rejected_rounds = rounds.first;
    cost.total_rounds = rounds.second;
    cost.rejection_rate = static_cast<double>(rounds.first) / static_cast<double>(rounds.second);
    summary.stages.push_back(cost);
  }
  return summary;
}

}  // namespace debias
