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

#include "fedinfo/paradigms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace fedinfo::paradigms {
namespace {

void check_user_lists(int user_count, std::size_t sizes, std::size_t priors,
                      const char* what) {
  if (user_count < 1) {
    throw std::invalid_argument(std::string(what) +
                                ": user_count must be >= 1");
  }
  if (sizes != static_cast<std::size_t>(user_count) ||
      priors != static_cast<std::size_t>(user_count)) {
    throw std::invalid_argument(
        std::string(what) +
        ": per-user size and prior lists must have user_count entries");
  }
}

}  // namespace

int DistributedConfig::total_samples() const {
  return std::accumulate(samples_per_user.begin(), samples_per_user.end(), 0);
}

DistributedConfig DistributedConfig::equal(int user_count, int samples,
                                           int dim, double variance) {
  DistributedConfig config;
  config.user_count = user_count;
  config.samples_per_user.assign(
      static_cast<std::size_t>(user_count > 0 ? user_count : 0), samples);
  config.priors.assign(config.samples_per_user.size(),
                       core::GaussianPrior::isotropic(dim, variance));
  validate(config);
  return config;
}

void validate(const DistributedConfig& config) {
  check_user_lists(config.user_count, config.samples_per_user.size(),
                   config.priors.size(), "DistributedConfig");
  for (int n : config.samples_per_user) {
    if (n < 1) {
      throw std::invalid_argument(
          "DistributedConfig: every samples_per_user entry must be >= 1");
    }
  }
  const int dim = config.priors.front().dim;
  for (const core::GaussianPrior& prior : config.priors) {
    core::validate(prior);
    if (prior.dim != dim) {
      throw std::invalid_argument(
          "DistributedConfig: all priors must share one dimension");
    }
  }
}

FederatedConfig FederatedConfig::equal(int user_count, int active_per_round,
                                       int rounds, int batch_size, int dim,
                                       double variance) {
  FederatedConfig config;
  config.user_count = user_count;
  config.rounds = rounds;
  config.batch_size_per_user.assign(
      static_cast<std::size_t>(user_count > 0 ? user_count : 0), batch_size);
  config.active_per_round = active_per_round;
  config.priors.assign(config.batch_size_per_user.size(),
                       core::GaussianPrior::isotropic(dim, variance));
  validate(config);
  return config;
}

void validate(const FederatedConfig& config) {
  check_user_lists(config.user_count, config.batch_size_per_user.size(),
                   config.priors.size(), "FederatedConfig");
  if (config.rounds < 1) {
    throw std::invalid_argument("FederatedConfig: rounds must be >= 1");
  }
  if (config.active_per_round < 1 ||
      config.active_per_round > config.user_count) {
    throw std::invalid_argument(
        "FederatedConfig: active_per_round must satisfy 1 <= K_a <= K");
  }
  for (int n : config.batch_size_per_user) {
    if (n < 1) {
      throw std::invalid_argument(
          "FederatedConfig: every batch_size_per_user entry must be >= 1");
    }
  }
  const int dim = config.priors.front().dim;
  for (const core::GaussianPrior& prior : config.priors) {
    core::validate(prior);
    if (prior.dim != dim) {
      throw std::invalid_argument(
          "FederatedConfig: all priors must share one dimension");
    }
  }
}

ParticipationLog ParticipationLog::full(int user_count, int rounds) {
  std::vector<int> everyone(static_cast<std::size_t>(user_count));
  std::iota(everyone.begin(), everyone.end(), 1);
  ParticipationLog log;
  log.active_sets.assign(static_cast<std::size_t>(rounds), everyone);
  return log;
}

core::Hypothesis centralized_erm(const core::Dataset& data) {
  if (data.samples.empty()) {
    throw std::invalid_argument("centralized_erm: dataset is empty");
  }
  const std::size_t dim = data.samples.front().size();
  core::Vector mean(dim, 0.0);
  for (const core::Vector& sample : data.samples) {
    if (sample.size() != dim) {
      throw std::invalid_argument("centralized_erm: inconsistent dimensions");
    }
    for (std::size_t i = 0; i < dim; ++i) mean[i] += sample[i];
  }
  const double inv = 1.0 / static_cast<double>(data.samples.size());
  for (double& entry : mean) entry *= inv;
  return core::Hypothesis{std::move(mean)};
}

core::Hypothesis local_erm(const core::Dataset& data) {
  return centralized_erm(data);
}

core::Hypothesis fuse_weighted_average(
    const std::vector<core::Hypothesis>& models,
    const std::vector<double>& weights) {
  if (models.size() != weights.size() || models.empty()) {
    throw std::invalid_argument(
        "fuse_weighted_average: models and weights must align and be "
        "non-empty");
  }
  double total_weight = 0.0;
  for (double w : weights) {
    if (w < 0.0) {
      throw std::invalid_argument(
          "fuse_weighted_average: weights must be nonnegative");
    }
    total_weight += w;
  }
  if (std::abs(total_weight - 1.0) > 1e-12) {
    throw std::invalid_argument(
        "fuse_weighted_average: weights must sum to 1 within 1e-12");
  }
  const std::size_t dim = models.front().value.size();
  core::Vector fused(dim, 0.0);
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].value.size() != dim) {
      throw std::invalid_argument(
          "fuse_weighted_average: inconsistent model dimensions");
    }
    for (std::size_t i = 0; i < dim; ++i) {
      fused[i] += weights[k] * models[k].value[i];
    }
  }
  return core::Hypothesis{std::move(fused)};
}

DistributedRun run_distributed(const DistributedConfig& config,
                               core::SeededRng& rng) {
  validate(config);
  const double n = static_cast<double>(config.total_samples());
  DistributedRun run;
  std::vector<core::Hypothesis> locals;
  std::vector<double> weights;
  locals.reserve(static_cast<std::size_t>(config.user_count));
  weights.reserve(static_cast<std::size_t>(config.user_count));
  for (int k = 1; k <= config.user_count; ++k) {
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    core::Dataset data =
        sample_dataset(config.priors[idx], config.samples_per_user[idx], rng);
    data.owner = k;
    data.batch = 0;
    locals.push_back(local_erm(data));
    weights.push_back(static_cast<double>(config.samples_per_user[idx]) / n);
    run.user_data.push_back(std::move(data));
  }
  run.global = fuse_weighted_average(locals, weights);
  return run;
}

std::vector<int> sample_participants(int user_count, int active,
                                     core::SeededRng& rng) {
  if (user_count < 1 || active < 1 || active > user_count) {
    throw std::invalid_argument(
        "sample_participants: need 1 <= active <= user_count");
  }
  std::vector<int> pool(static_cast<std::size_t>(user_count));
  std::iota(pool.begin(), pool.end(), 1);
  if (active == user_count) return pool;
  // Partial Fisher-Yates: consumes exactly `active` draws.
  for (int i = 0; i < active; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(
            rng.uniform_below(static_cast<std::uint64_t>(user_count - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(active));
  std::sort(pool.begin(), pool.end());
  return pool;
}

RoundResult federated_round(const core::Hypothesis& prev_global,
                            int round_index,
                            const std::map<int, core::Dataset>& batches,
                            const std::vector<int>& active) {
  if (round_index < 1) {
    throw std::invalid_argument("federated_round: round_index must be >= 1");
  }
  if (active.empty()) {
    throw std::invalid_argument("federated_round: active set is empty");
  }
  if (batches.size() != active.size()) {
    throw std::invalid_argument(
        "federated_round: batches must match the active set exactly");
  }
  const double t = static_cast<double>(round_index);
  const double carry = (t - 1.0) / t;

  RoundResult result;
  std::vector<core::Hypothesis> locals;
  std::vector<double> weights;
  double round_total = 0.0;
  for (int k : active) {
    const auto it = batches.find(k);
    if (it == batches.end()) {
      throw std::invalid_argument(
          "federated_round: missing batch for an active user");
    }
    const core::Dataset& batch = it->second;
    if (batch.samples.empty()) {
      throw std::invalid_argument("federated_round: empty batch");
    }
    const std::size_t dim = batch.samples.front().size();
    if (round_index > 1 && prev_global.value.size() != dim) {
      throw std::invalid_argument(
          "federated_round: previous global dimension mismatch");
    }
    core::Vector local(dim, 0.0);
    for (const core::Vector& sample : batch.samples) {
      for (std::size_t i = 0; i < dim; ++i) local[i] += sample[i];
    }
    const double batch_size = static_cast<double>(batch.samples.size());
    // Multiply by the reciprocal, exactly as the one-shot sample mean does,
    // so a single full-participation round is bitwise equal to it.
    const double scale = 1.0 / (t * batch_size);
    for (std::size_t i = 0; i < dim; ++i) {
      local[i] *= scale;
      if (round_index > 1) local[i] += carry * prev_global.value[i];
    }
    result.locals.emplace(k, core::Hypothesis{std::move(local)});
    round_total += batch_size;
  }
  for (int k : active) {
    locals.push_back(result.locals.at(k));
    weights.push_back(
        static_cast<double>(batches.at(k).samples.size()) / round_total);
  }
  result.global = fuse_weighted_average(locals, weights);
  return result;
}

FederatedTrajectory run_federated(const FederatedConfig& config,
                                  core::SeededRng& rng) {
  validate(config);
  FederatedTrajectory trajectory;
  core::Hypothesis global{
      core::Vector(static_cast<std::size_t>(config.priors.front().dim), 0.0)};
  for (int t = 1; t <= config.rounds; ++t) {
    const std::vector<int> active =
        sample_participants(config.user_count, config.active_per_round, rng);
    std::map<int, core::Dataset> batches;
    for (int k : active) {
      const std::size_t idx = static_cast<std::size_t>(k - 1);
      core::Dataset batch = sample_dataset(
          config.priors[idx], config.batch_size_per_user[idx], rng);
      batch.owner = k;
      batch.batch = t;
      batches.emplace(k, std::move(batch));
    }
    RoundResult round = federated_round(global, t, batches, active);
    global = round.global;
    trajectory.global_models.push_back(round.global);
    trajectory.local_models.push_back(std::move(round.locals));
    trajectory.participation.active_sets.push_back(active);
    for (auto& [k, batch] : batches) {
      trajectory.batches.push_back(std::move(batch));
    }
  }
  return trajectory;
}

}  // namespace fedinfo::paradigms
