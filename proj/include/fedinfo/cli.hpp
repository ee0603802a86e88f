/*
 * Copyright 2026 The FedInfo Authors.
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
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedinfo/core.hpp"

namespace fedinfo::cli {

// Invalid input (unreadable file, malformed JSON, violated precondition).
// Commands report it on stderr and exit with code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One output cell: a full-precision number, the "inf" token, an explicit
// null, or verbatim text.
struct Cell {
  enum class Kind { number, infinite, null_value, text };
  Kind kind = Kind::null_value;
  double number = 0.0;
  std::string text;

  static Cell of(double value);
  static Cell of(const core::ExtendedReal& value);
  static Cell of_text(std::string value);
  static Cell null();
};

struct RowTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

// CSV with a mandatory header row, '.' decimals, LF line endings, and
// numbers rendered with 17 significant digits.
std::string to_csv(const RowTable& table);

// JSON array of objects keyed by column name, in column order. Infinite
// values become the string "inf" (JSON has no infinity literal), nulls stay
// JSON null.
std::string to_json(const RowTable& table);

struct CentralizedCheck {
  int n = 2;
  int dim = 1;
  double variance = 1.0;
};

struct DistributedCheck {
  std::vector<int> sizes;
  std::vector<double> variances;
  int dim = 1;
};

struct FederatedCheck {
  int users = 1;
  int active = 1;
  int batch_size = 1;
  int rounds = 1;
  double variance = 1.0;
  int dim = 1;
};

using LemmaCheck =
    std::variant<CentralizedCheck, DistributedCheck, FederatedCheck>;

struct LemmaCheckConfig {
  std::uint64_t seed = 0;
  long long trials = 100000;
  std::vector<LemmaCheck> checks;
};

struct Figure1Config {
  std::uint64_t seed = 0;
  int users = 10;
  int batch_size = 4;
  int dim = 1;
  double variance = 1.0;
  int rounds = 1;
  int active_min = 2;
  int active_max = 10;
  long long pattern_trials = 20000;
  long long entropy_trials = 10;
  double convergence_tol = 5e-4;
  int target_user = 1;
  int target_round = 1;
  int target_index = 1;
};

struct BoundsSweepConfig {
  std::uint64_t seed = 0;
  std::vector<int> users_grid = {1, 2, 5, 10};
  std::vector<int> size_grid = {2, 4, 16};
  std::vector<int> dim_grid = {1, 5};
  std::vector<double> variance_grid = {0.5, 1.0, 2.0};
  std::vector<int> federated_rounds = {1, 2};
  bool force_zero_mi = false;
};

struct GenExperimentConfig {
  std::uint64_t seed = 0;
  int users = 10;
  int active = 10;
  int batch_size = 4;
  int dim = 1;
  double variance = 1.0;
  int rounds = 5;
  long long trials = 100000;
};

// Parsers validate schema_version == 1, the mandatory seed, and every
// precondition, throwing ConfigError with the origin (and the line for JSON
// syntax errors) in the message.
LemmaCheckConfig parse_lemma_check_config(const std::string& text,
                                          const std::string& origin);
Figure1Config parse_figure1_config(const std::string& text,
                                   const std::string& origin);
BoundsSweepConfig parse_bounds_sweep_config(const std::string& text,
                                            const std::string& origin);
GenExperimentConfig parse_gen_experiment_config(const std::string& text,
                                                const std::string& origin);

struct CommandOptions {
  std::string config_path;
  std::string out_path;        // empty writes to stdout
  std::string format = "csv";  // "csv" or "json"
  std::optional<std::uint64_t> seed;    // overrides the config seed
  std::optional<long long> trials;      // overrides the config trial count
};

// Exit codes: 0 success, 1 tolerance/assertion failure, 2 invalid input.
int cmd_lemma_check(const CommandOptions& options);
int cmd_figure1(const CommandOptions& options);
int cmd_bounds_sweep(const CommandOptions& options);
int cmd_gen_experiment(const CommandOptions& options);

// Full argument parsing and dispatch for the fedinfo binary.
int run_cli(int argc, const char* const* argv);

}  // namespace fedinfo::cli
