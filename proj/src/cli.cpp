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

#include "fedinfo/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "fedinfo/bounds.hpp"
#include "fedinfo/estimators.hpp"
#include "fedinfo/paradigms.hpp"
#include "json.hpp"

namespace fedinfo::cli {
namespace {

using nlohmann::json;

constexpr double kExactTol = 1e-12;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t limit =
        std::min(text.size(), e.byte > 0 ? e.byte - 1 : std::size_t{0});
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + e.what());
  }
}

const json& require_field(const json& object, const std::string& key,
                          const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) {
    throw ConfigError(where + ": missing required field \"" + key + "\"");
  }
  return *it;
}

long long as_integer(const json& value, const std::string& where) {
  if (!value.is_number_integer() && !value.is_number_unsigned()) {
    throw ConfigError(where + ": expected an integer");
  }
  return value.get<long long>();
}

double as_number(const json& value, const std::string& where) {
  if (!value.is_number()) {
    throw ConfigError(where + ": expected a number");
  }
  return value.get<double>();
}

std::uint64_t parse_seed(const json& root, const std::string& origin) {
  const auto it = root.find("seed");
  if (it == root.end()) {
    throw ConfigError(origin +
                      ": seed is mandatory (wall-clock defaults are not "
                      "allowed; runs must be reproducible)");
  }
  if (!it->is_number_unsigned() &&
      !(it->is_number_integer() && it->get<long long>() >= 0)) {
    throw ConfigError(origin + ": seed must be a nonnegative integer");
  }
  return it->get<std::uint64_t>();
}

void check_schema_version(const json& root, const std::string& origin) {
  if (!root.is_object()) {
    throw ConfigError(origin + ": config root must be a JSON object");
  }
  const json& version = require_field(root, "schema_version", origin);
  if (as_integer(version, origin + ": schema_version") != 1) {
    throw ConfigError(origin + ": schema_version must be 1");
  }
}

int get_int(const json& object, const std::string& key, int fallback,
            const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) return fallback;
  const long long value = as_integer(*it, where + "." + key);
  return static_cast<int>(value);
}

long long get_long(const json& object, const std::string& key,
                   long long fallback, const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) return fallback;
  return as_integer(*it, where + "." + key);
}

double get_double(const json& object, const std::string& key, double fallback,
                  const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) return fallback;
  return as_number(*it, where + "." + key);
}

std::vector<int> get_int_list(const json& object, const std::string& key,
                              std::vector<int> fallback,
                              const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) return fallback;
  if (!it->is_array() || it->empty()) {
    throw ConfigError(where + "." + key + ": expected a non-empty array");
  }
  std::vector<int> values;
  for (const json& entry : *it) {
    values.push_back(
        static_cast<int>(as_integer(entry, where + "." + key + " entry")));
  }
  return values;
}

std::vector<double> get_double_list(const json& object, const std::string& key,
                                    std::vector<double> fallback,
                                    const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) return fallback;
  if (!it->is_array() || it->empty()) {
    throw ConfigError(where + "." + key + ": expected a non-empty array");
  }
  std::vector<double> values;
  for (const json& entry : *it) {
    values.push_back(as_number(entry, where + "." + key + " entry"));
  }
  return values;
}

void require_trials_at_least_100(long long trials, const std::string& where) {
  if (trials < 100) {
    throw ConfigError(where + ": estimators require trials >= 100");
  }
}

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string render_cell_text(const Cell& cell) {
  switch (cell.kind) {
    case Cell::Kind::number:
      return core::format_real17(cell.number);
    case Cell::Kind::infinite:
      return "inf";
    case Cell::Kind::null_value:
      return "null";
    case Cell::Kind::text:
      return cell.text;
  }
  return "null";
}

}  // namespace

Cell Cell::of(double value) {
  Cell cell;
  cell.kind = Kind::number;
  cell.number = value;
  return cell;
}

Cell Cell::of(const core::ExtendedReal& value) {
  if (value.is_infinite()) {
    Cell cell;
    cell.kind = Kind::infinite;
    return cell;
  }
  return of(value.value());
}

Cell Cell::of_text(std::string value) {
  Cell cell;
  cell.kind = Kind::text;
  cell.text = std::move(value);
  return cell;
}

Cell Cell::null() { return Cell{}; }

std::string to_csv(const RowTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(table.columns[i]);
  }
  out += '\n';
  for (const std::vector<Cell>& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_escape(render_cell_text(row[i]));
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const RowTable& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const std::vector<Cell>& row : table.rows) {
    nlohmann::ordered_json object = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Cell& cell = row[i];
      switch (cell.kind) {
        case Cell::Kind::number:
          object[table.columns[i]] = cell.number;
          break;
        case Cell::Kind::infinite:
          object[table.columns[i]] = "inf";
          break;
        case Cell::Kind::null_value:
          object[table.columns[i]] = nullptr;
          break;
        case Cell::Kind::text:
          object[table.columns[i]] = cell.text;
          break;
      }
    }
    rows.push_back(std::move(object));
  }
  return rows.dump(2) + "\n";
}

LemmaCheckConfig parse_lemma_check_config(const std::string& text,
                                          const std::string& origin) {
  const json root = parse_json_text(text, origin);
  check_schema_version(root, origin);
  LemmaCheckConfig config;
  config.seed = parse_seed(root, origin);
  config.trials = get_long(root, "trials", config.trials, origin);
  require_trials_at_least_100(config.trials, origin + ".trials");

  const json& checks = require_field(root, "checks", origin);
  if (!checks.is_array() || checks.empty()) {
    throw ConfigError(origin + ".checks: expected a non-empty array");
  }
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const std::string where = origin + ": checks[" + std::to_string(i) + "]";
    const json& entry = checks[i];
    if (!entry.is_object()) {
      throw ConfigError(where + ": expected an object");
    }
    const json& kind = require_field(entry, "kind", where);
    if (!kind.is_string()) {
      throw ConfigError(where + ".kind: expected a string");
    }
    const std::string kind_name = kind.get<std::string>();
    if (kind_name == "centralized") {
      CentralizedCheck check;
      check.n = get_int(entry, "n", 0, where);
      check.dim = get_int(entry, "dim", 1, where);
      check.variance = get_double(entry, "variance", 1.0, where);
      if (check.n < 2) {
        throw ConfigError(
            where +
            ": centralized check requires n >= 2 (the per-sample mutual "
            "information is undefined at n = 1)");
      }
      if (check.dim < 1 || !(check.variance > 0.0)) {
        throw ConfigError(where + ": requires dim >= 1 and variance > 0");
      }
      config.checks.emplace_back(check);
    } else if (kind_name == "distributed") {
      DistributedCheck check;
      check.sizes = get_int_list(entry, "sizes", {}, where);
      check.variances = get_double_list(entry, "variances", {}, where);
      check.dim = get_int(entry, "dim", 1, where);
      if (check.sizes.empty() || check.sizes.size() != check.variances.size()) {
        throw ConfigError(
            where + ": sizes and variances must be non-empty and aligned");
      }
      double weighted = 0.0;
      for (std::size_t k = 0; k < check.sizes.size(); ++k) {
        if (check.sizes[k] < 1 || !(check.variances[k] > 0.0)) {
          throw ConfigError(where +
                            ": requires sizes >= 1 and variances > 0");
        }
        weighted += static_cast<double>(check.sizes[k]) * check.variances[k];
      }
      for (double variance : check.variances) {
        if (!(weighted > variance)) {
          throw ConfigError(
              where +
              ": requires sum of n_i*sigma_i^2 > sigma_k^2 for every user");
        }
      }
      if (check.dim < 1) throw ConfigError(where + ": requires dim >= 1");
      config.checks.emplace_back(std::move(check));
    } else if (kind_name == "federated") {
      FederatedCheck check;
      check.users = get_int(entry, "users", 1, where);
      check.active = get_int(entry, "active", check.users, where);
      check.batch_size = get_int(entry, "batch_size", 1, where);
      check.rounds = get_int(entry, "rounds", 1, where);
      check.variance = get_double(entry, "variance", 1.0, where);
      check.dim = get_int(entry, "dim", 1, where);
      if (check.users < 1 || check.active < 1 || check.active > check.users) {
        throw ConfigError(where + ": requires 1 <= active <= users");
      }
      if (check.batch_size < 1 || check.rounds < 1) {
        throw ConfigError(where + ": requires batch_size >= 1 and rounds >= 1");
      }
      if (check.dim < 1 || !(check.variance > 0.0)) {
        throw ConfigError(where + ": requires dim >= 1 and variance > 0");
      }
      if (static_cast<long long>(check.batch_size) * check.active < 2) {
        throw ConfigError(
            where +
            ": requires t*n*K_a >= 2 (mutual information is undefined with "
            "a single used sample)");
      }
      config.checks.emplace_back(check);
    } else {
      throw ConfigError(where + ".kind: unknown kind \"" + kind_name +
                        "\" (expected centralized, distributed, or federated)");
    }
  }
  return config;
}

Figure1Config parse_figure1_config(const std::string& text,
                                   const std::string& origin) {
  const json root = parse_json_text(text, origin);
  check_schema_version(root, origin);
  Figure1Config config;
  config.seed = parse_seed(root, origin);
  config.users = get_int(root, "users", config.users, origin);
  config.batch_size = get_int(root, "batch_size", config.batch_size, origin);
  config.dim = get_int(root, "dim", config.dim, origin);
  config.variance = get_double(root, "variance", config.variance, origin);
  config.rounds = get_int(root, "rounds", config.rounds, origin);
  config.active_min = get_int(root, "active_min", config.active_min, origin);
  config.active_max =
      get_int(root, "active_max", std::min(config.active_max, config.users),
              origin);
  config.pattern_trials =
      get_long(root, "pattern_trials", config.pattern_trials, origin);
  config.entropy_trials =
      get_long(root, "entropy_trials", config.entropy_trials, origin);
  config.convergence_tol =
      get_double(root, "convergence_tol", config.convergence_tol, origin);
  config.target_user = get_int(root, "target_user", config.target_user, origin);
  config.target_round =
      get_int(root, "target_round", config.target_round, origin);
  config.target_index =
      get_int(root, "target_index", config.target_index, origin);

  if (config.users < 2) {
    throw ConfigError(origin +
                      ": requires users >= 2 (the distributed reference "
                      "leakage is infinite for a single user)");
  }
  if (config.batch_size < 1 || config.dim < 1 || !(config.variance > 0.0) ||
      config.rounds < 1) {
    throw ConfigError(origin +
                      ": requires batch_size >= 1, dim >= 1, variance > 0, "
                      "rounds >= 1");
  }
  if (config.active_min < 1 || config.active_min > config.active_max ||
      config.active_max > config.users) {
    throw ConfigError(origin +
                      ": requires 1 <= active_min <= active_max <= users");
  }
  require_trials_at_least_100(config.pattern_trials,
                              origin + ".pattern_trials");
  if (config.entropy_trials < 1) {
    throw ConfigError(origin + ": requires entropy_trials >= 1");
  }
  if (config.convergence_tol < 0.0) {
    throw ConfigError(origin + ": requires convergence_tol >= 0");
  }
  if (config.target_user < 1 || config.target_user > config.users ||
      config.target_round < 1 || config.target_round > config.rounds ||
      config.target_index < 1 || config.target_index > config.batch_size) {
    throw ConfigError(origin +
                      ": target (user, round, index) must lie inside the "
                      "protocol dimensions");
  }
  return config;
}

BoundsSweepConfig parse_bounds_sweep_config(const std::string& text,
                                            const std::string& origin) {
  const json root = parse_json_text(text, origin);
  check_schema_version(root, origin);
  BoundsSweepConfig config;
  config.seed = parse_seed(root, origin);
  config.users_grid =
      get_int_list(root, "users_grid", config.users_grid, origin);
  config.size_grid = get_int_list(root, "size_grid", config.size_grid, origin);
  config.dim_grid = get_int_list(root, "dim_grid", config.dim_grid, origin);
  config.variance_grid =
      get_double_list(root, "variance_grid", config.variance_grid, origin);
  config.federated_rounds =
      get_int_list(root, "federated_rounds", config.federated_rounds, origin);
  const auto zero = root.find("force_zero_mi");
  if (zero != root.end()) {
    if (!zero->is_boolean()) {
      throw ConfigError(origin + ".force_zero_mi: expected a boolean");
    }
    config.force_zero_mi = zero->get<bool>();
  }
  for (int users : config.users_grid) {
    if (users < 1) throw ConfigError(origin + ": users_grid entries must be >= 1");
  }
  for (int size : config.size_grid) {
    if (size < 1) throw ConfigError(origin + ": size_grid entries must be >= 1");
  }
  for (int dim : config.dim_grid) {
    if (dim < 1) throw ConfigError(origin + ": dim_grid entries must be >= 1");
  }
  for (double variance : config.variance_grid) {
    if (!(variance > 0.0)) {
      throw ConfigError(origin + ": variance_grid entries must be > 0");
    }
  }
  for (int rounds : config.federated_rounds) {
    if (rounds < 1) {
      throw ConfigError(origin + ": federated_rounds entries must be >= 1");
    }
  }
  return config;
}

GenExperimentConfig parse_gen_experiment_config(const std::string& text,
                                                const std::string& origin) {
  const json root = parse_json_text(text, origin);
  check_schema_version(root, origin);
  GenExperimentConfig config;
  config.seed = parse_seed(root, origin);
  config.users = get_int(root, "users", config.users, origin);
  config.active = get_int(root, "active", config.users, origin);
  config.batch_size = get_int(root, "batch_size", config.batch_size, origin);
  config.dim = get_int(root, "dim", config.dim, origin);
  config.variance = get_double(root, "variance", config.variance, origin);
  config.rounds = get_int(root, "rounds", config.rounds, origin);
  config.trials = get_long(root, "trials", config.trials, origin);
  if (config.users < 1 || config.active < 1 || config.active > config.users) {
    throw ConfigError(origin + ": requires 1 <= active <= users");
  }
  if (config.batch_size < 1 || config.dim < 1 || !(config.variance > 0.0) ||
      config.rounds < 1) {
    throw ConfigError(origin +
                      ": requires batch_size >= 1, dim >= 1, variance > 0, "
                      "rounds >= 1");
  }
  if (static_cast<long long>(config.batch_size) * config.active < 2) {
    throw ConfigError(origin +
                      ": requires t*n*K_a >= 2 (mutual information is "
                      "undefined with a single used sample)");
  }
  require_trials_at_least_100(config.trials, origin + ".trials");
  return config;
}

namespace {

const std::vector<std::string> kReportColumns = {
    "experiment", "params", "analytic", "estimate",
    "stderr",     "lower",  "upper",    "status"};

std::string render_table(const RowTable& table, const std::string& format) {
  if (format == "csv") return to_csv(table);
  if (format == "json") return to_json(table);
  throw ConfigError("unsupported output format \"" + format +
                    "\" (expected csv or json)");
}

void write_output(const std::string& out_path, const std::string& rendered) {
  if (out_path.empty()) {
    std::cout << rendered;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file: " + out_path);
  out << rendered;
  out.flush();
  if (!out) throw ConfigError("cannot write output file: " + out_path);
}

Cell status_cell(bool ok, const char* good, const char* bad) {
  return Cell::of_text(ok ? good : bad);
}

bool within(double a, double b, double tol) { return std::abs(a - b) <= tol; }

long long elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

struct CommandIo {
  std::string config_text;
  std::string origin;
};

CommandIo load_config(const CommandOptions& options) {
  if (options.config_path.empty()) {
    throw ConfigError("--config is required");
  }
  CommandIo io;
  io.origin = options.config_path;
  io.config_text = read_file(options.config_path);
  return io;
}

// Rows for one closed-form-vs-estimator comparison set.
void append_centralized_rows(const CentralizedCheck& check, long long trials,
                             const core::SeededRng& rng, RowTable& table,
                             bool& all_pass) {
  const bounds::ClosedFormReport closed =
      bounds::centralized_closed_forms(check.n, check.dim, check.variance);
  std::ostringstream params;
  params << "n=" << check.n << ";d=" << check.dim
         << ";var=" << core::format_real17(check.variance)
         << ";trials=" << trials;

  const core::GaussianPrior prior =
      core::GaussianPrior::isotropic(check.dim, check.variance);
  const estimators::MCEstimate gen =
      estimators::estimate_gen_mc(prior, check.n, trials, rng.derive("gen"));
  const estimators::LinearCoefficientMap map =
      estimators::extract_coefficients(check.n);
  const std::vector<double> variances{check.variance};
  const double mi = estimators::gaussian_mi(map, variances,
                                            {1, 0, 1}, check.dim);
  const core::ExtendedReal leak = estimators::privacy_leakage_conditional(
      map, variances, {1, 0, 1}, check.dim);

  const bounds::BoundReport report = bounds::gen_bounds_centralized(
      std::vector<double>(static_cast<std::size_t>(check.n),
                          closed.mi_per_sample),
      bounds::zero_envelope(),
      bounds::envelope_for_sqrt_dual(closed.psi_minus_slope));

  const bool gen_ok = within(closed.gen, gen.mean, 3.0 * gen.std_error);
  table.rows.push_back({Cell::of_text("centralized-gen"),
                        Cell::of_text(params.str()), Cell::of(closed.gen),
                        Cell::of(gen.mean), Cell::of(gen.std_error),
                        Cell::of(report.lower), Cell::of(report.upper),
                        status_cell(gen_ok, "pass", "fail")});
  all_pass = all_pass && gen_ok;

  const bool mi_ok = within(closed.mi_per_sample, mi, kExactTol);
  table.rows.push_back({Cell::of_text("centralized-mi"),
                        Cell::of_text(params.str()),
                        Cell::of(closed.mi_per_sample), Cell::of(mi),
                        Cell::null(), Cell::null(), Cell::null(),
                        status_cell(mi_ok, "pass", "fail")});
  all_pass = all_pass && mi_ok;

  const bool priv_ok =
      closed.priv_per_user.has_value() &&
      closed.priv_per_user->is_infinite() == leak.is_infinite() &&
      (leak.is_infinite() ||
       within(closed.priv_per_user->value(), leak.value(), kExactTol));
  table.rows.push_back({Cell::of_text("centralized-priv"),
                        Cell::of_text(params.str()),
                        Cell::of(*closed.priv_per_user), Cell::of(leak),
                        Cell::null(), Cell::null(), Cell::null(),
                        status_cell(priv_ok, "pass", "fail")});
  all_pass = all_pass && priv_ok;
}

void append_distributed_rows(const DistributedCheck& check, long long trials,
                             const core::SeededRng& rng, RowTable& table,
                             bool& all_pass) {
  const std::vector<bounds::ClosedFormReport> closed =
      bounds::distributed_closed_forms(check.sizes, check.variances,
                                       check.dim);
  std::ostringstream params;
  params << "sizes=";
  for (std::size_t k = 0; k < check.sizes.size(); ++k) {
    if (k > 0) params << '|';
    params << check.sizes[k];
  }
  params << ";vars=";
  for (std::size_t k = 0; k < check.variances.size(); ++k) {
    if (k > 0) params << '|';
    params << core::format_real17(check.variances[k]);
  }
  params << ";d=" << check.dim << ";trials=" << trials;

  paradigms::DistributedConfig config;
  config.user_count = static_cast<int>(check.sizes.size());
  config.samples_per_user = check.sizes;
  for (double variance : check.variances) {
    config.priors.push_back(
        core::GaussianPrior::isotropic(check.dim, variance));
  }
  const estimators::MCEstimate gen =
      estimators::estimate_gen_mc(config, trials, rng.derive("gen"));
  const estimators::LinearCoefficientMap map =
      estimators::extract_coefficients(config);

  std::vector<std::vector<double>> mi_grid;
  std::vector<bounds::EnvelopePair> envelopes;
  for (std::size_t k = 0; k < closed.size(); ++k) {
    mi_grid.emplace_back(static_cast<std::size_t>(check.sizes[k]),
                         closed[k].mi_per_sample);
    envelopes.push_back(
        {bounds::zero_envelope(),
         bounds::envelope_for_sqrt_dual(closed[k].psi_minus_slope)});
  }
  const bounds::BoundReport report =
      bounds::gen_bounds_distributed(mi_grid, check.sizes, envelopes);

  const bool gen_ok = within(closed.front().gen, gen.mean,
                             3.0 * gen.std_error);
  table.rows.push_back({Cell::of_text("distributed-gen"),
                        Cell::of_text(params.str()),
                        Cell::of(closed.front().gen), Cell::of(gen.mean),
                        Cell::of(gen.std_error), Cell::of(report.lower),
                        Cell::of(report.upper),
                        status_cell(gen_ok, "pass", "fail")});
  all_pass = all_pass && gen_ok;

  for (std::size_t k = 0; k < closed.size(); ++k) {
    const int user = static_cast<int>(k) + 1;
    const estimators::SampleKey target{user, 0, 1};
    const double mi =
        estimators::gaussian_mi(map, check.variances, target, check.dim);
    const bool mi_ok = within(closed[k].mi_per_sample, mi, kExactTol);
    table.rows.push_back(
        {Cell::of_text("distributed-mi"),
         Cell::of_text(params.str() + ";user=" + std::to_string(user)),
         Cell::of(closed[k].mi_per_sample), Cell::of(mi), Cell::null(),
         Cell::null(), Cell::null(), status_cell(mi_ok, "pass", "fail")});
    all_pass = all_pass && mi_ok;

    const core::ExtendedReal leak = estimators::privacy_leakage_conditional(
        map, check.variances, target, check.dim);
    const core::ExtendedReal& analytic = *closed[k].priv_per_user;
    const bool priv_ok =
        analytic.is_infinite() == leak.is_infinite() &&
        (leak.is_infinite() ||
         within(analytic.value(), leak.value(), kExactTol));
    table.rows.push_back(
        {Cell::of_text("distributed-priv"),
         Cell::of_text(params.str() + ";user=" + std::to_string(user)),
         Cell::of(analytic), Cell::of(leak), Cell::null(), Cell::null(),
         Cell::null(), status_cell(priv_ok, "pass", "fail")});
    all_pass = all_pass && priv_ok;
  }
}

void append_federated_rows(const FederatedCheck& check, long long trials,
                           const core::SeededRng& rng, RowTable& table,
                           bool& all_pass) {
  const bounds::ClosedFormReport closed = bounds::federated_closed_forms(
      check.rounds, check.batch_size, check.users, check.active,
      check.variance, check.dim);
  std::ostringstream params;
  params << "K=" << check.users << ";Ka=" << check.active
         << ";n=" << check.batch_size << ";T=" << check.rounds
         << ";var=" << core::format_real17(check.variance)
         << ";d=" << check.dim << ";trials=" << trials;

  const paradigms::FederatedConfig config = paradigms::FederatedConfig::equal(
      check.users, check.active, check.rounds, check.batch_size, check.dim,
      check.variance);
  const estimators::MCEstimate gen = estimators::estimate_gen_mc(
      config, check.rounds, trials, rng.derive("gen"));

  // The fixed pattern {1..K_a} per round stands in for any single history:
  // with exchangeable users the per-sample information is pattern-free.
  paradigms::ParticipationLog participation;
  std::vector<int> active_set(static_cast<std::size_t>(check.active));
  for (int k = 0; k < check.active; ++k) {
    active_set[static_cast<std::size_t>(k)] = k + 1;
  }
  participation.active_sets.assign(static_cast<std::size_t>(check.rounds),
                                   active_set);
  const estimators::LinearCoefficientMap map =
      estimators::extract_coefficients(config, participation);
  const std::vector<double> variances(static_cast<std::size_t>(check.users),
                                      check.variance);
  const estimators::SampleKey target{1, check.rounds, 1};
  const double mi =
      estimators::gaussian_mi(map, variances, target, check.dim);

  std::map<int, std::vector<double>> mi_active;
  for (int k : active_set) {
    mi_active[k] = std::vector<double>(
        static_cast<std::size_t>(check.batch_size), closed.mi_per_sample);
  }
  const std::vector<bounds::EnvelopePair> envelopes(
      static_cast<std::size_t>(check.users),
      {bounds::zero_envelope(),
       bounds::envelope_for_sqrt_dual(closed.psi_minus_slope)});
  const bounds::BoundReport report = bounds::gen_bounds_federated(
      mi_active, participation, check.rounds, envelopes);

  const double analytic_gen = *closed.gen_active_users;
  const bool gen_ok = within(analytic_gen, gen.mean, 3.0 * gen.std_error);
  table.rows.push_back({Cell::of_text("federated-gen"),
                        Cell::of_text(params.str()), Cell::of(analytic_gen),
                        Cell::of(gen.mean), Cell::of(gen.std_error),
                        Cell::of(report.lower), Cell::of(report.upper),
                        status_cell(gen_ok, "pass", "fail")});
  all_pass = all_pass && gen_ok;

  const bool mi_ok = within(closed.mi_per_sample, mi, kExactTol);
  table.rows.push_back({Cell::of_text("federated-mi"),
                        Cell::of_text(params.str()),
                        Cell::of(closed.mi_per_sample), Cell::of(mi),
                        Cell::null(), Cell::null(), Cell::null(),
                        status_cell(mi_ok, "pass", "fail")});
  all_pass = all_pass && mi_ok;

  if (check.active == check.users) {
    const core::ExtendedReal leak = estimators::privacy_leakage_conditional(
        map, variances, {1, 1, 1}, check.dim);
    const core::ExtendedReal& analytic = *closed.priv_per_user;
    const bool priv_ok =
        analytic.is_infinite() == leak.is_infinite() &&
        (leak.is_infinite() ||
         within(analytic.value(), leak.value(), kExactTol));
    table.rows.push_back({Cell::of_text("federated-priv"),
                          Cell::of_text(params.str()), Cell::of(analytic),
                          Cell::of(leak), Cell::null(), Cell::null(),
                          Cell::null(), status_cell(priv_ok, "pass", "fail")});
    all_pass = all_pass && priv_ok;
  }
}

}  // namespace

int cmd_lemma_check(const CommandOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const CommandIo io = load_config(options);
    LemmaCheckConfig config =
        parse_lemma_check_config(io.config_text, io.origin);
    if (options.seed) config.seed = *options.seed;
    if (options.trials) {
      require_trials_at_least_100(*options.trials, "--trials");
      config.trials = *options.trials;
    }

    RowTable table;
    table.columns = kReportColumns;
    bool all_pass = true;
    const core::SeededRng root(config.seed, "lemma-check");
    for (std::size_t i = 0; i < config.checks.size(); ++i) {
      const core::SeededRng rng =
          root.derive("check:" + std::to_string(i));
      std::visit(
          [&](const auto& check) {
            using T = std::decay_t<decltype(check)>;
            if constexpr (std::is_same_v<T, CentralizedCheck>) {
              append_centralized_rows(check, config.trials, rng, table,
                                      all_pass);
            } else if constexpr (std::is_same_v<T, DistributedCheck>) {
              append_distributed_rows(check, config.trials, rng, table,
                                      all_pass);
            } else {
              append_federated_rows(check, config.trials, rng, table,
                                    all_pass);
            }
          },
          config.checks[i]);
    }

    write_output(options.out_path, render_table(table, options.format));
    std::cerr << "lemma-check: " << table.rows.size() << " rows, "
              << (all_pass ? "all pass" : "FAILURES present") << " ("
              << elapsed_ms(start) << " ms)\n";
    return all_pass ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_figure1(const CommandOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const CommandIo io = load_config(options);
    Figure1Config config = parse_figure1_config(io.config_text, io.origin);
    if (options.seed) config.seed = *options.seed;
    if (options.trials) {
      require_trials_at_least_100(*options.trials, "--trials");
      config.pattern_trials = *options.trials;
    }

    const std::vector<bounds::ClosedFormReport> distributed =
        bounds::distributed_closed_forms(
            std::vector<int>(static_cast<std::size_t>(config.users),
                             config.batch_size),
            std::vector<double>(static_cast<std::size_t>(config.users),
                                config.variance),
            config.dim);
    const core::ExtendedReal& reference =
        *distributed[static_cast<std::size_t>(config.target_user - 1)]
             .priv_per_user;

    RowTable table;
    table.columns = {"k_a", "federated_priv_estimate", "stderr",
                     "distributed_priv_analytic", "status"};
    const core::SeededRng root(config.seed, "figure1");
    for (int k_a = config.active_min; k_a <= config.active_max; ++k_a) {
      const paradigms::FederatedConfig protocol =
          paradigms::FederatedConfig::equal(config.users, k_a, config.rounds,
                                            config.batch_size, config.dim,
                                            config.variance);
      const estimators::LeakageEstimate estimate =
          estimators::privacy_leakage_federated_mc(
              protocol, config.target_user, config.target_round,
              config.target_index, config.pattern_trials,
              config.entropy_trials,
              root.derive("active:" + std::to_string(k_a)),
              config.convergence_tol);
      table.rows.push_back(
          {Cell::of(static_cast<double>(k_a)), Cell::of(estimate.value),
           Cell::of(estimate.std_error), Cell::of(reference),
           Cell::of_text(estimate.converged ? "ok" : "nonconverged")});
    }

    write_output(options.out_path, render_table(table, options.format));
    std::cerr << "figure1: " << table.rows.size() << " rows ("
              << elapsed_ms(start) << " ms)\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_bounds_sweep(const CommandOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const CommandIo io = load_config(options);
    BoundsSweepConfig config =
        parse_bounds_sweep_config(io.config_text, io.origin);
    if (options.seed) config.seed = *options.seed;

    RowTable table;
    table.columns = kReportColumns;
    long long violations = 0;
    for (int users : config.users_grid) {
      for (int size : config.size_grid) {
        if (static_cast<long long>(users) * size < 2) {
          std::cerr << "bounds-sweep: skipping degenerate grid point K="
                    << users << " n=" << size << " (needs K*n >= 2)\n";
          continue;
        }
        for (int dim : config.dim_grid) {
          for (double variance : config.variance_grid) {
            std::ostringstream params;
            params << "K=" << users << ";n=" << size << ";d=" << dim
                   << ";var=" << core::format_real17(variance);

            const std::vector<bounds::ClosedFormReport> closed =
                bounds::distributed_closed_forms(
                    std::vector<int>(static_cast<std::size_t>(users), size),
                    std::vector<double>(static_cast<std::size_t>(users),
                                        variance),
                    dim);
            const double mi_value =
                config.force_zero_mi ? 0.0 : closed.front().mi_per_sample;
            std::vector<std::vector<double>> mi_grid(
                static_cast<std::size_t>(users),
                std::vector<double>(static_cast<std::size_t>(size), mi_value));
            std::vector<bounds::EnvelopePair> envelopes(
                static_cast<std::size_t>(users),
                {bounds::zero_envelope(),
                 bounds::envelope_for_sqrt_dual(
                     closed.front().psi_minus_slope)});
            const bounds::BoundReport distributed =
                bounds::gen_bounds_distributed(
                    mi_grid,
                    std::vector<int>(static_cast<std::size_t>(users), size),
                    envelopes);
            const bool distributed_ok =
                config.force_zero_mi ||
                (distributed.lower <= closed.front().gen + 1e-9 &&
                 closed.front().gen <= distributed.upper + 1e-9);
            if (!distributed_ok) ++violations;
            table.rows.push_back(
                {Cell::of_text("distributed"), Cell::of_text(params.str()),
                 config.force_zero_mi ? Cell::null()
                                      : Cell::of(closed.front().gen),
                 Cell::null(), Cell::null(), Cell::of(distributed.lower),
                 Cell::of(distributed.upper),
                 status_cell(distributed_ok, "ok", "violation")});

            for (int rounds : config.federated_rounds) {
              const bounds::ClosedFormReport federated_closed =
                  bounds::federated_closed_forms(rounds, size, users, users,
                                                 variance, dim);
              const double federated_mi =
                  config.force_zero_mi ? 0.0 : federated_closed.mi_per_sample;
              const paradigms::ParticipationLog participation =
                  paradigms::ParticipationLog::full(users, rounds);
              std::map<int, std::vector<double>> mi_active;
              for (int k = 1; k <= users; ++k) {
                mi_active[k] = std::vector<double>(
                    static_cast<std::size_t>(size), federated_mi);
              }
              const std::vector<bounds::EnvelopePair> federated_envelopes(
                  static_cast<std::size_t>(users),
                  {bounds::zero_envelope(),
                   bounds::envelope_for_sqrt_dual(
                       federated_closed.psi_minus_slope)});
              const bounds::BoundReport report = bounds::gen_bounds_federated(
                  mi_active, participation, rounds, federated_envelopes);
              const bool federated_ok =
                  config.force_zero_mi ||
                  (report.lower <= federated_closed.gen + 1e-9 &&
                   federated_closed.gen <= report.upper + 1e-9);
              if (!federated_ok) ++violations;
              table.rows.push_back(
                  {Cell::of_text("federated"),
                   Cell::of_text(params.str() + ";t=" + std::to_string(rounds)),
                   config.force_zero_mi ? Cell::null()
                                        : Cell::of(federated_closed.gen),
                   Cell::null(), Cell::null(), Cell::of(report.lower),
                   Cell::of(report.upper),
                   status_cell(federated_ok, "ok", "violation")});
            }
          }
        }
      }
    }

    write_output(options.out_path, render_table(table, options.format));
    std::cerr << "bounds-sweep: " << table.rows.size() << " rows, "
              << violations << " violations (" << elapsed_ms(start)
              << " ms)\n";
    return violations == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_gen_experiment(const CommandOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const CommandIo io = load_config(options);
    GenExperimentConfig config =
        parse_gen_experiment_config(io.config_text, io.origin);
    if (options.seed) config.seed = *options.seed;
    if (options.trials) {
      require_trials_at_least_100(*options.trials, "--trials");
      config.trials = *options.trials;
    }

    const paradigms::FederatedConfig protocol =
        paradigms::FederatedConfig::equal(config.users, config.active,
                                          config.rounds, config.batch_size,
                                          config.dim, config.variance);
    std::vector<int> active_set(static_cast<std::size_t>(config.active));
    for (int k = 0; k < config.active; ++k) {
      active_set[static_cast<std::size_t>(k)] = k + 1;
    }

    RowTable table;
    table.columns = kReportColumns;
    bool every_round_matched = true;
    const core::SeededRng root(config.seed, "gen-experiment");
    for (int t = 1; t <= config.rounds; ++t) {
      const estimators::MCEstimate estimate = estimators::estimate_gen_mc(
          protocol, t, config.trials, root.derive("round:" + std::to_string(t)));
      const bounds::ClosedFormReport closed = bounds::federated_closed_forms(
          t, config.batch_size, config.users, config.active, config.variance,
          config.dim);

      paradigms::ParticipationLog participation;
      participation.active_sets.assign(static_cast<std::size_t>(t),
                                       active_set);
      std::map<int, std::vector<double>> mi_active;
      for (int k : active_set) {
        mi_active[k] = std::vector<double>(
            static_cast<std::size_t>(config.batch_size),
            closed.mi_per_sample);
      }
      const std::vector<bounds::EnvelopePair> envelopes(
          static_cast<std::size_t>(config.users),
          {bounds::zero_envelope(),
           bounds::envelope_for_sqrt_dual(closed.psi_minus_slope)});
      const bounds::BoundReport report =
          bounds::gen_bounds_federated(mi_active, participation, t, envelopes);

      std::ostringstream params;
      params << "K=" << config.users << ";Ka=" << config.active
             << ";n=" << config.batch_size << ";d=" << config.dim
             << ";var=" << core::format_real17(config.variance) << ";t=" << t
             << ";trials=" << config.trials;

      const bool total_match =
          within(closed.gen, estimate.mean, 3.0 * estimate.std_error);
      const bool active_match = within(*closed.gen_active_users,
                                       estimate.mean,
                                       3.0 * estimate.std_error);
      every_round_matched = every_round_matched && (total_match || active_match);
      table.rows.push_back(
          {Cell::of_text("federated-gen-total-users"),
           Cell::of_text(params.str()), Cell::of(closed.gen),
           Cell::of(estimate.mean), Cell::of(estimate.std_error),
           Cell::of(report.lower), Cell::of(report.upper),
           status_cell(total_match, "match", "mismatch")});
      table.rows.push_back(
          {Cell::of_text("federated-gen-active-users"),
           Cell::of_text(params.str()), Cell::of(*closed.gen_active_users),
           Cell::of(estimate.mean), Cell::of(estimate.std_error),
           Cell::of(report.lower), Cell::of(report.upper),
           status_cell(active_match, "match", "mismatch")});
    }

    write_output(options.out_path, render_table(table, options.format));
    std::cerr << "gen-experiment: " << table.rows.size() << " rows ("
              << elapsed_ms(start) << " ms)\n";
    return every_round_matched ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "fedinfo: generalization bounds and privacy leakage for centralized, "
      "distributed, and federated Gaussian mean estimation"};
  app.require_subcommand(1);

  CommandOptions options;
  std::uint64_t seed_value = 0;
  long long trials_value = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config_path,
                    "path to the JSON experiment config")
        ->required();
    sub->add_option("--out", options.out_path,
                    "output file path (stdout when omitted)");
    sub->add_option("--format", options.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--seed", seed_value, "override the config seed");
    sub->add_option("--trials", trials_value,
                    "override the config trial count")
        ->check(CLI::PositiveNumber);
  };

  std::vector<std::pair<CLI::App*, int (*)(const CommandOptions&)>> commands;
  CLI::App* lemma = app.add_subcommand(
      "lemma-check", "closed forms vs independent estimators, pass/fail");
  commands.emplace_back(lemma, &cmd_lemma_check);
  CLI::App* figure1 = app.add_subcommand(
      "figure1",
      "privacy-leakage comparison sweep over the active-user count");
  commands.emplace_back(figure1, &cmd_figure1);
  CLI::App* sweep = app.add_subcommand(
      "bounds-sweep", "lower/upper bound sandwich across a parameter grid");
  commands.emplace_back(sweep, &cmd_bounds_sweep);
  CLI::App* gen = app.add_subcommand(
      "gen-experiment",
      "Monte Carlo generalization error across federated rounds");
  commands.emplace_back(gen, &cmd_gen_experiment);
  for (auto& [sub, fn] : commands) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& [sub, fn] : commands) {
    if (sub->parsed()) {
      if (sub->count("--seed") > 0) options.seed = seed_value;
      if (sub->count("--trials") > 0) options.trials = trials_value;
      return fn(options);
    }
  }
  return 2;
}

}  // namespace fedinfo::cli
