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

// Drives the installed CLI binary (path in the DEBIAS_CLI environment
// variable) through its documented surface: formats, exit codes, determinism.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"

#include "debias/source.hpp"
#include "support.hpp"

using debias::test::TempFile;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

std::string cli_path() {
  const char* path = std::getenv("DEBIAS_CLI");
  REQUIRE(path != nullptr);
  return path;
}

CliResult run_cli(const std::string& args, bool merge_stderr = false) {
  const std::string command =
      "\"" + cli_path() + "\" " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  char buffer[4096];
  std::size_t read = 0;
  while ((read = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.output.append(buffer, read);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

TEST_CASE("gen emits one record per sample and is byte-stable") {
  const std::string flags = "gen --n 6 --count 3 --bias 0.3 --seed 1";
  const CliResult first = run_cli(flags);
  REQUIRE(first.exit_code == 0);
  const std::vector<std::string> lines = lines_of(first.output);
  REQUIRE(lines.size() == 3);
  for (const std::string& line : lines) {
    const std::uint64_t value = std::stoull(line);
    REQUIRE(value < 6);
  }

  const CliResult second = run_cli(flags);
  REQUIRE(second.output == first.output);
}

TEST_CASE("gen on n=1 draws nothing") {
  const CliResult result = run_cli("gen --n 1 --count 2 --bias 0.5 --seed 0 --telemetry");
  REQUIRE(result.exit_code == 0);
  REQUIRE(result.output == "0,0\n0,0\n");
}

TEST_CASE("gen formats carry identical values") {
  const std::string base = "--n 12 --count 5 --bias 0.4 --seed 9";
  const CliResult csv = run_cli("gen " + base + " --format csv");
  REQUIRE(csv.exit_code == 0);
  std::vector<std::uint64_t> csv_values;
  for (const std::string& line : lines_of(csv.output)) {
    csv_values.push_back(std::stoull(line));
  }
  REQUIRE(csv_values.size() == 5);

  const CliResult json = run_cli("gen " + base + " --format json --telemetry");
  REQUIRE(json.exit_code == 0);
  const std::vector<std::string> json_lines = lines_of(json.output);
  REQUIRE(json_lines.size() == 5);
  for (std::size_t i = 0; i < json_lines.size(); ++i) {
    const nlohmann::json record = nlohmann::json::parse(json_lines[i]);
    REQUIRE(record.at("value").get<std::uint64_t>() == csv_values[i]);
    REQUIRE(record.at("flips").get<std::uint64_t>() >= 3);
    REQUIRE(record.at("stages").size() == 3);  // 12 = 2 * 2 * 3
  }

  const CliResult raw = run_cli("gen " + base + " --format raw");
  REQUIRE(raw.exit_code == 0);
  REQUIRE(raw.output.size() == 5 * 8);
  for (std::size_t i = 0; i < 5; ++i) {
    std::uint64_t value = 0;
    for (int b = 7; b >= 0; --b) {
      value = (value << 8) | static_cast<std::uint8_t>(raw.output[i * 8 + b]);
    }
    REQUIRE(value == csv_values[i]);
  }
}

TEST_CASE("gen flag validation exits 2") {
  REQUIRE(run_cli("gen --n 0 --bias 0.5").exit_code == 2);
  REQUIRE(run_cli("gen --n 6").exit_code == 2);                          // no source
  REQUIRE(run_cli("gen --n 6 --bias 0.5 --bits /tmp/x.bits").exit_code == 2);  // both sources
  REQUIRE(run_cli("gen --n 6 --bias 1.5").exit_code == 2);
  REQUIRE(run_cli("gen --n 6 --bias 0").exit_code == 2);
  REQUIRE(run_cli("gen --n 6 --bias 0.5 --format xml").exit_code == 2);
  REQUIRE(run_cli("gen --n 6 --bits /nonexistent/entropy.bits").exit_code == 2);
  REQUIRE(run_cli("nosuchcommand").exit_code == 2);
}

TEST_CASE("gen from a bit file") {
  // 64 flips from a seeded coin, written out and replayed through the CLI
  debias::BiasedCoin coin = debias::simulated_source(debias::BiasParams(0.5), 4);
  std::vector<debias::Flip> flips;
  for (int i = 0; i < 64; ++i) {
    flips.push_back(coin.next());
  }
  TempFile file("cli-gen");
  debias::write_bit_file(file.path(), flips);

  SECTION("succeeds while bits remain") {
    const CliResult result = run_cli("gen --n 6 --count 2 --bits " + file.path());
    REQUIRE(result.exit_code == 0);
    REQUIRE(lines_of(result.output).size() == 2);
  }

  SECTION("exhaustion exits 3 and reports completed samples") {
    const CliResult result = run_cli("gen --n 6 --count 1000 --bits " + file.path(), true);
    REQUIRE(result.exit_code == 3);
    REQUIRE(result.output.find("samples completed") != std::string::npos);
  }
}

TEST_CASE("gen hits the round cap on a constant stream") {
  std::vector<debias::Flip> flips(256, debias::Flip::Head);
  TempFile file("cli-cap");
  debias::write_bit_file(file.path(), flips);
  const CliResult result = run_cli("gen --n 6 --count 1 --max-rounds 3 --bits " + file.path(), true);
  REQUIRE(result.exit_code == 4);
  REQUIRE(result.output.find("round cap") != std::string::npos);
}

TEST_CASE("factor prints the factorization and the cost") {
  const CliResult composite = run_cli("factor 12");
  REQUIRE(composite.exit_code == 0);
  REQUIRE(composite.output.find("12 = 2^2 * 3") != std::string::npos);
  REQUIRE(composite.output.find("c(12) = 7") != std::string::npos);

  const CliResult prime = run_cli("factor 13");
  REQUIRE(prime.exit_code == 0);
  REQUIRE(prime.output.find("13 = 13") != std::string::npos);
  REQUIRE(prime.output.find("c(13) = 13") != std::string::npos);

  const CliResult unit = run_cli("factor 1");
  REQUIRE(unit.exit_code == 0);
  REQUIRE(unit.output.find("1 = (empty product)") != std::string::npos);

  REQUIRE(run_cli("factor 0").exit_code == 2);
  REQUIRE(run_cli("factor").exit_code == 2);
}

TEST_CASE("verify runs the oracle checks") {
  SECTION("default flags pass") {
    const CliResult result = run_cli("verify");
    REQUIRE(result.exit_code == 0);
    REQUIRE(result.output.find("PASS") != std::string::npos);
    REQUIRE(result.output.find("FAIL") == std::string::npos);
  }

  SECTION("machine-readable report") {
    const CliResult result = run_cli("verify --max-p 5 --json");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(result.output);
    REQUIRE(report.at("all_pass").get<bool>());
    REQUIRE(report.at("checks").size() > 0);
  }

  SECTION("flag validation exits 2") {
    REQUIRE(run_cli("verify --max-p 4").exit_code == 2);
    REQUIRE(run_cli("verify --max-p 23").exit_code == 2);
    REQUIRE(run_cli("verify --bias-grid 0/1").exit_code == 2);
    REQUIRE(run_cli("verify --bias-grid 1/1").exit_code == 2);
    REQUIRE(run_cli("verify --bias-grid abc").exit_code == 2);
    REQUIRE(run_cli("verify --bias-grid 1/3,nope").exit_code == 2);
  }
}

TEST_CASE("bench reports theoretical and empirical flip cost") {
  SECTION("prime case") {
    const CliResult result = run_cli("bench --n 2 --bias 0.5 --seed 1 --samples 2000 --json");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(result.output);
    REQUIRE(report.at("theoretical_flips").get<double>() == 4.0);
    REQUIRE(report.at("theoretical_flips_exact").get<std::string>() == "4");
    REQUIRE(report.at("empirical_mean_flips").get<double>() > 3.0);
    REQUIRE(report.at("empirical_mean_flips").get<double>() < 5.0);
  }

  SECTION("composite case prints text") {
    const CliResult result = run_cli("bench --n 6 --bias 0.5 --seed 7 --samples 2000");
    REQUIRE(result.exit_code == 0);
    REQUIRE(result.output.find("theoretical expected flips: 8") != std::string::npos);
  }

  SECTION("sweep prints the cost table and the sublinearity fraction") {
    const CliResult result = run_cli("bench --sweep 1000");
    REQUIRE(result.exit_code == 0);
    REQUIRE(result.output.find("c(12) = 7") != std::string::npos);
    REQUIRE(result.output.find("sublinearity fraction") != std::string::npos);

    const CliResult json = run_cli("bench --sweep 1000 --json");
    REQUIRE(json.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(json.output);
    REQUIRE(report.at("c").at("12").get<std::uint64_t>() == 7);
    REQUIRE(report.at("fraction").get<double>() > 0.0);
    REQUIRE(report.at("fraction").get<double>() < 1.0);
  }

  SECTION("flag validation exits 2") {
    REQUIRE(run_cli("bench").exit_code == 2);
    REQUIRE(run_cli("bench --n 6 --sweep 100").exit_code == 2);
    REQUIRE(run_cli("bench --n 6 --bias 1.2").exit_code == 2);
    REQUIRE(run_cli("bench --sweep 1").exit_code == 2);
  }
}
