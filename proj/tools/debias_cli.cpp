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

// Command-line front end: gen (draw samples), verify (exact oracle checks),
// bench (theoretical vs empirical flip cost), factor (factorization + c(n)).
//
// Exit codes: 0 success, 1 verification failure, 2 invalid flags,
// 3 source exhausted, 4 round cap exceeded.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "debias/debias.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitBadFlags = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitRoundCap = 4;

struct GenOptions {
  std::uint64_t n = 0;
  std::uint64_t count = 1;
  std::optional<double> bias;
  std::uint64_t seed = 0;
  std::string bits_path;
  std::string format = "csv";
  std::uint64_t max_rounds = 10'000'000;
  bool telemetry = false;
};

struct VerifyOptions {
  std::uint64_t max_p = 13;
  std::string bias_grid = "1/10,1/3,1/2";
  bool json = false;
};

struct BenchOptions {
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> sweep;
  double bias = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t samples = 100'000;
  bool json = false;
};

void write_raw_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void emit_sample(const debias::SampleReport& report, const GenOptions& opt) {
  if (opt.format == "raw") {
    write_raw_u64(std::cout, report.value);
    return;
  }
  if (opt.format == "json") {
    ordered_json record;
    record["value"] = report.value;
    if (opt.telemetry) {
      record["flips"] = report.flips_consumed;
      ordered_json stages = ordered_json::array();
      for (const auto& stage : report.stages) {
        stages.push_back({{"prime", stage.prime},
                          {"rejected_rounds", stage.rejected_rounds},
                          {"accepted_round_flips", stage.accepted_round_flips}});
      }
      record["stages"] = std::move(stages);
    }
    std::cout << record.dump() << '\n';
    return;
  }
  std::cout << report.value;
  if (opt.telemetry) {
    std::cout << ',' << report.flips_consumed;
  }
  std::cout << '\n';
}

template <debias::BitSource S>
int run_gen_with(S& src, const GenOptions& opt) {
  debias::SamplerConfig cfg;
  cfg.max_rounds_per_stage = opt.max_rounds;
  std::uint64_t done = 0;
  try {
    for (std::uint64_t i = 0; i < opt.count; ++i) {
      const debias::SampleReport report = debias::sample_uniform(opt.n, src, cfg);
      emit_sample(report, opt);
      ++done;
    }
  } catch (const debias::SourceExhausted& e) {
    std::cerr << "error: source exhausted after " << done << " of " << opt.count
              << " samples completed (" << e.flips_consumed
              << " flips consumed in the interrupted draw)\n";
    return kExitExhausted;
  } catch (const debias::RoundCapExceeded& e) {
    std::cerr << "error: " << e.what() << " after " << done << " of " << opt.count
              << " samples completed\n";
    return kExitRoundCap;
  }
  std::cout.flush();
  return kExitOk;
}

int run_gen(const GenOptions& opt) {
  if (opt.n == 0) {
    std::cerr << "error: --n must be at least 1\n";
    return kExitBadFlags;
  }
  const bool has_bias = opt.bias.has_value();
  const bool has_bits = !opt.bits_path.empty();
  if (has_bias == has_bits) {
    std::cerr << "error: select exactly one source: --bias <a> or --bits <path>\n";
    return kExitBadFlags;
  }
  if (opt.format != "csv" && opt.format != "json" && opt.format != "raw") {
    std::cerr << "error: --format must be csv, json or raw\n";
    return kExitBadFlags;
  }
  try {
    if (has_bias) {
      debias::BiasedCoin src = debias::simulated_source(debias::BiasParams(*opt.bias), opt.seed);
      return run_gen_with(src, opt);
    }
    debias::BitFileReader src = debias::file_source(opt.bits_path);
    return run_gen_with(src, opt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, sep)) {
    parts.push_back(part);
  }
  return parts;
}

int run_verify(const VerifyOptions& opt) {
  if (opt.max_p > 19 || !debias::is_prime(opt.max_p)) {
    std::cerr << "error: --max-p must be a prime at most 19\n";
    return kExitBadFlags;
  }
  std::vector<debias::Rational> grid;
  std::vector<std::string> grid_text = split(opt.bias_grid, ',');
  try {
    for (const std::string& item : grid_text) {
      const debias::Rational a = debias::parse_rational(item);
      if (!(a > 0 && a < 1)) {
        std::cerr << "error: bias " << item << " must lie strictly in (0,1)\n";
        return kExitBadFlags;
      }
      grid.push_back(a);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  }
  if (grid.empty()) {
    std::cerr << "error: empty bias grid\n";
    return kExitBadFlags;
  }

  std::vector<std::uint64_t> primes;
  for (std::uint64_t p = 2; p <= opt.max_p; ++p) {
    if (debias::is_prime(p)) primes.push_back(p);
  }

  bool all_pass = true;
  ordered_json checks = ordered_json::array();
  const auto record = [&](const std::string& name, const std::string& param, bool pass) {
    all_pass = all_pass && pass;
    if (opt.json) {
      checks.push_back({{"check", name}, {"param", param}, {"pass", pass}});
    } else {
      std::cout << (pass ? "PASS" : "FAIL") << ' ' << name << ' ' << param << '\n';
    }
  };

  for (const std::uint64_t p : primes) {
    record("lemma-partition", "p=" + std::to_string(p), debias::check_lemma_partition(p).ok);
  }
  for (const std::uint64_t p : primes) {
    bool pass = true;
    for (const debias::Rational& a : grid) {
      pass = pass && debias::exact_prime_dist(p, a).is_uniform();
    }
    record("prime-uniformity", "p=" + std::to_string(p), pass);
  }
  for (std::uint64_t n = 1; n <= 30; ++n) {
    bool pass = true;
    for (const debias::Rational& a : grid) {
      pass = pass && debias::exact_composite_dist(n, a).is_uniform();
    }
    record("composite-uniformity", "n=" + std::to_string(n), pass);
  }
  for (const std::uint64_t p : primes) {
    bool pass = true;
    for (const debias::Rational& a : grid) {
      const debias::ResidueCheck check = debias::check_residue_equivalence(p, a);
      pass = pass && check.ok() && check.dist.probs == debias::exact_prime_dist(p, a).probs;
    }
    record("residue-equivalence", "p=" + std::to_string(p), pass);
  }

  if (opt.json) {
    ordered_json out;
    out["max_p"] = opt.max_p;
    out["bias_grid"] = grid_text;
    out["checks"] = std::move(checks);
    out["all_pass"] = all_pass;
    std::cout << out.dump(2) << '\n';
  }
  return all_pass ? kExitOk : kExitVerifyFailed;
}

int run_bench(const BenchOptions& opt) {
  if (opt.n.has_value() == opt.sweep.has_value()) {
    std::cerr << "error: select exactly one of --n or --sweep\n";
    return kExitBadFlags;
  }
  if (opt.sweep) {
    const std::uint64_t limit = *opt.sweep;
    if (limit < 2) {
      std::cerr << "error: --sweep must be at least 2\n";
      return kExitBadFlags;
    }
    const debias::SublinearityResult result = debias::sublinearity_fraction(limit, 0.5);
    if (opt.json) {
      ordered_json out;
      out["sweep"] = limit;
      out["epsilon"] = 0.5;
      out["satisfying"] = result.satisfying;
      out["total"] = result.total;
      out["fraction"] = result.fraction();
      ordered_json ctable;
      for (std::uint64_t n = 2; n <= std::min<std::uint64_t>(limit, 16); ++n) {
        ctable[std::to_string(n)] = debias::cost_c(n);
      }
      out["c"] = std::move(ctable);
      std::cout << out.dump(2) << '\n';
    } else {
      std::cout << "c(n) for small n:\n";
      for (std::uint64_t n = 2; n <= std::min<std::uint64_t>(limit, 16); ++n) {
        std::cout << "  c(" << n << ") = " << debias::cost_c(n) << '\n';
      }
      std::cout << "sublinearity fraction (N=" << limit << ", eps=0.5): " << result.fraction()
                << " (" << result.satisfying << "/" << result.total << ")\n";
    }
    return kExitOk;
  }

  const std::uint64_t n = *opt.n;
  if (n == 0) {
    std::cerr << "error: --n must be at least 1\n";
    return kExitBadFlags;
  }
  debias::Rational theoretical(0);
  try {
    // The double bias is a dyadic rational; the conversion is exact, so the
    // theoretical value matches the simulated coin's bias precisely.
    if (n >= 2) {
      theoretical = debias::expected_flips_composite(n, debias::Rational(opt.bias));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  }
  std::uint64_t total_flips = 0;
  try {
    debias::BiasedCoin src = debias::simulated_source(debias::BiasParams(opt.bias), opt.seed);
    for (std::uint64_t i = 0; i < opt.samples; ++i) {
      total_flips += debias::sample_uniform(n, src).flips_consumed;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  }
  const double theory = theoretical.convert_to<double>();
  const double empirical =
      opt.samples > 0 ? static_cast<double>(total_flips) / static_cast<double>(opt.samples) : 0.0;
  const double rel_error = theory > 0.0 ? std::abs(empirical - theory) / theory : 0.0;
  if (opt.json) {
    ordered_json out;
    out["n"] = n;
    out["bias"] = opt.bias;
    out["seed"] = opt.seed;
    out["samples"] = opt.samples;
    std::ostringstream exact;
    exact << theoretical;
    out["theoretical_flips_exact"] = exact.str();
    out["theoretical_flips"] = theory;
    out["empirical_mean_flips"] = empirical;
    out["relative_error"] = rel_error;
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << "n = " << n << "  bias = " << opt.bias << "  seed = " << opt.seed
              << "  samples = " << opt.samples << '\n';
    std::cout << "theoretical expected flips: " << theory << " (exact " << theoretical << ")\n";
    std::cout << "empirical mean flips:       " << empirical << '\n';
    std::cout << "relative error:             " << rel_error << '\n';
  }
  return kExitOk;
}

int run_factor(std::uint64_t n) {
  if (n == 0) {
    std::cerr << "error: n must be at least 1\n";
    return kExitBadFlags;
  }
  if (n == 1) {
    std::cout << "1 = (empty product)\n";
    return kExitOk;
  }
  const debias::PrimeFactorization factorization = debias::factorize(n);
  std::cout << n << " = ";
  bool first = true;
  for (const auto& [p, t] : factorization.factors) {
    if (!first) std::cout << " * ";
    first = false;
    std::cout << p;
    if (t > 1) std::cout << '^' << t;
  }
  std::cout << '\n';
  std::cout << "c(" << n << ") = " << debias::cost_c(n) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"debias: exact discrete uniform samples from a biased binary source"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "draw uniform samples on [0, n)");
  gen_cmd->add_option("--n", gen.n, "range size (samples lie in [0, n))")->required();
  gen_cmd->add_option("--count", gen.count, "number of samples to draw");
  gen_cmd->add_option("--bias", gen.bias, "simulated coin: head probability in (0,1)");
  gen_cmd->add_option("--seed", gen.seed, "simulated coin seed");
  gen_cmd->add_option("--bits", gen.bits_path, "bit-file source path");
  gen_cmd->add_option("--format", gen.format, "output format: csv|json|raw");
  gen_cmd->add_option("--max-rounds", gen.max_rounds, "per-stage rejection round cap");
  gen_cmd->add_flag("--telemetry", gen.telemetry, "include flip counts in the output");

  VerifyOptions verify;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the exact enumeration checks");
  verify_cmd->add_option("--max-p", verify.max_p, "largest stage prime to check (prime <= 19)");
  verify_cmd->add_option("--bias-grid", verify.bias_grid,
                         "comma-separated exact biases, e.g. 1/10,1/3,1/2");
  verify_cmd->add_flag("--json", verify.json, "machine-readable report");

  BenchOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "flip-cost benchmarks");
  bench_cmd->add_option("--n", bench.n, "range size to benchmark");
  bench_cmd->add_option("--sweep", bench.sweep, "evaluate c(n) and the sublinearity fraction up to N");
  bench_cmd->add_option("--bias", bench.bias, "simulated coin: head probability in (0,1)");
  bench_cmd->add_option("--seed", bench.seed, "simulated coin seed");
  bench_cmd->add_option("--samples", bench.samples, "number of samples for the empirical mean");
  bench_cmd->add_flag("--json", bench.json, "machine-readable report");

  std::uint64_t factor_n = 0;
  CLI::App* factor_cmd = app.add_subcommand("factor", "prime factorization and c(n)");
  factor_cmd->add_option("n", factor_n, "integer to factor")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadFlags;
  }

  if (gen_cmd->parsed()) return run_gen(gen);
  if (verify_cmd->parsed()) return run_verify(verify);
  if (bench_cmd->parsed()) return run_bench(bench);
  if (factor_cmd->parsed()) return run_factor(factor_n);
  return kExitBadFlags;
}
