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

#include "fedinfo/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>

namespace fedinfo::estimators {
namespace {

constexpr long long kGenBlock = 4096;
constexpr long long kPatternBlock = 256;
constexpr long long kMaxSubsetsPerRound = 200000;
constexpr long long kMaxMixtureComponents = 100000;

// Runs `work` over [0, total) split into fixed blocks and merges the
// per-block accumulators in index order, so the result does not depend on
// how many workers execute the blocks.
RunningMoments reduce_blocks(
    long long total, long long block_size, int threads,
    const std::function<void(long long, long long, RunningMoments&)>& work) {
  const long long blocks = (total + block_size - 1) / block_size;
  std::vector<RunningMoments> partial(static_cast<std::size_t>(blocks));
  const auto run_block = [&](long long b) {
    const long long begin = b * block_size;
    const long long end = std::min(total, begin + block_size);
    work(begin, end, partial[static_cast<std::size_t>(b)]);
  };

  const long long workers =
      std::min<long long>(std::max(threads, 1), blocks);
  if (workers <= 1) {
    for (long long b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<long long> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (long long w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          for (;;) {
            const long long b = next.fetch_add(1);
            if (b >= blocks) break;
            run_block(b);
          }
        } catch (...) {
          const std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  RunningMoments result;
  for (const RunningMoments& block : partial) result.merge(block);
  return result;
}

MCEstimate finish_estimate(const RunningMoments& moments,
                           const core::SeededRng& rng) {
  MCEstimate estimate;
  estimate.mean = moments.mean;
  estimate.std_error = moments.std_error();
  estimate.trials = moments.count;
  estimate.seed = rng.seed();
  return estimate;
}

void require_trials(long long trials) {
  if (trials < 100) {
    throw std::invalid_argument("Monte Carlo estimators require trials >= 100");
  }
}

std::string trial_label(long long index) {
  return "trial:" + std::to_string(index);
}

double log_gaussian_density(const core::Vector& point, const core::Vector& mean,
                            double variance) {
  double squared = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double diff = point[i] - mean[i];
    squared += diff * diff;
  }
  return -0.5 * static_cast<double>(point.size()) *
             std::log(2.0 * std::numbers::pi * variance) -
         squared / (2.0 * variance);
}

}  // namespace

double LinearCoefficientMap::coefficient(const SampleKey& key) const {
  const auto it = coefficients.find(key);
  return it == coefficients.end() ? 0.0 : it->second;
}

double LinearCoefficientMap::coefficient_sum() const {
  double total = 0.0;
  for (const auto& [key, value] : coefficients) total += value;
  return total;
}

LinearCoefficientMap extract_coefficients(int sample_count) {
  if (sample_count < 1) {
    throw std::invalid_argument(
        "extract_coefficients: sample_count must be >= 1");
  }
  LinearCoefficientMap map;
  const double c = 1.0 / static_cast<double>(sample_count);
  for (int j = 1; j <= sample_count; ++j) {
    map.coefficients.emplace(SampleKey{1, 0, j}, c);
  }
  return map;
}

LinearCoefficientMap extract_coefficients(
    const paradigms::DistributedConfig& config) {
  paradigms::validate(config);
  LinearCoefficientMap map;
  const double c = 1.0 / static_cast<double>(config.total_samples());
  for (int k = 1; k <= config.user_count; ++k) {
    const int size = config.samples_per_user[static_cast<std::size_t>(k - 1)];
    for (int j = 1; j <= size; ++j) {
      map.coefficients.emplace(SampleKey{k, 0, j}, c);
    }
  }
  map.constant.assign(static_cast<std::size_t>(config.priors.front().dim),
                      0.0);
  return map;
}

LinearCoefficientMap extract_coefficients(
    const paradigms::FederatedConfig& config,
    const paradigms::ParticipationLog& participation) {
  paradigms::validate(config);
  const std::size_t rounds = participation.active_sets.size();
  if (rounds == 0 || rounds > static_cast<std::size_t>(config.rounds)) {
    throw std::invalid_argument(
        "extract_coefficients: participation log must cover 1..T rounds");
  }
  LinearCoefficientMap map;
  for (std::size_t t = 1; t <= rounds; ++t) {
    const std::vector<int>& active = participation.active_sets[t - 1];
    if (active.size() != static_cast<std::size_t>(config.active_per_round)) {
      throw std::invalid_argument(
          "extract_coefficients: active set size disagrees with the config");
    }
    double round_total = 0.0;
    int previous = 0;
    for (int k : active) {
      if (k <= previous || k > config.user_count) {
        throw std::invalid_argument(
            "extract_coefficients: active sets must be sorted distinct user "
            "indices in 1..K");
      }
      previous = k;
      round_total +=
          static_cast<double>(config.batch_size_per_user[static_cast<std::size_t>(k - 1)]);
    }
    // The previous aggregate is carried with weight (t-1)/t regardless of
    // who participates, so all earlier coefficients shrink uniformly.
    const double carry = (static_cast<double>(t) - 1.0) / static_cast<double>(t);
    for (auto& [key, value] : map.coefficients) value *= carry;
    const double fresh = 1.0 / (static_cast<double>(t) * round_total);
    for (int k : active) {
      const int size = config.batch_size_per_user[static_cast<std::size_t>(k - 1)];
      for (int j = 1; j <= size; ++j) {
        map.coefficients.emplace(SampleKey{k, static_cast<int>(t), j}, fresh);
      }
    }
  }
  map.constant.assign(static_cast<std::size_t>(config.priors.front().dim),
                      0.0);
  return map;
}

core::Hypothesis apply_coefficients(const LinearCoefficientMap& map,
                                    const std::vector<core::Dataset>& batches) {
  std::map<std::pair<int, int>, const core::Dataset*> lookup;
  for (const core::Dataset& batch : batches) {
    lookup[{batch.owner, batch.batch}] = &batch;
  }
  core::Vector result = map.constant;
  for (const auto& [key, value] : map.coefficients) {
    const auto it = lookup.find({key.user, key.round});
    if (it == lookup.end()) {
      throw std::invalid_argument(
          "apply_coefficients: no batch for a referenced (user, round)");
    }
    const core::Dataset& batch = *it->second;
    if (key.index < 1 ||
        static_cast<std::size_t>(key.index) > batch.samples.size()) {
      throw std::invalid_argument(
          "apply_coefficients: sample index outside the batch");
    }
    const core::Vector& sample =
        batch.samples[static_cast<std::size_t>(key.index - 1)];
    if (result.empty()) result.assign(sample.size(), 0.0);
    if (result.size() != sample.size()) {
      throw std::invalid_argument("apply_coefficients: dimension mismatch");
    }
    for (std::size_t i = 0; i < sample.size(); ++i) {
      result[i] += value * sample[i];
    }
  }
  return core::Hypothesis{std::move(result)};
}

double gaussian_mi(const LinearCoefficientMap& map,
                   const std::vector<double>& variances,
                   const SampleKey& target, int d) {
  if (d < 1) throw std::invalid_argument("gaussian_mi: d must be >= 1");
  double target_term = 0.0;
  double rest = 0.0;
  for (const auto& [key, value] : map.coefficients) {
    if (key.user < 1 ||
        static_cast<std::size_t>(key.user) > variances.size()) {
      throw std::invalid_argument(
          "gaussian_mi: coefficient user outside the variance list");
    }
    const double term =
        value * value * variances[static_cast<std::size_t>(key.user - 1)];
    if (key == target) {
      target_term = term;
    } else {
      rest += term;
    }
  }
  if (target_term == 0.0) return 0.0;
  if (rest <= 0.0) {
    throw std::invalid_argument(
        "gaussian_mi: aggregate variance given the target is zero, the "
        "mutual information is unbounded");
  }
  return 0.5 * static_cast<double>(d) * std::log1p(target_term / rest);
}

core::ExtendedReal privacy_leakage_conditional(
    const LinearCoefficientMap& map, const std::vector<double>& variances,
    const SampleKey& target, int d) {
  if (d < 1) {
    throw std::invalid_argument(
        "privacy_leakage_conditional: d must be >= 1");
  }
  double target_term = 0.0;
  double environment = 0.0;  // variance from users other than the owner
  for (const auto& [key, value] : map.coefficients) {
    if (key.user < 1 ||
        static_cast<std::size_t>(key.user) > variances.size()) {
      throw std::invalid_argument(
          "privacy_leakage_conditional: coefficient user outside the "
          "variance list");
    }
    const double term =
        value * value * variances[static_cast<std::size_t>(key.user - 1)];
    if (key == target) {
      target_term = term;
    } else if (key.user != target.user) {
      environment += term;
    }
    // The owner's other samples are conditioned on: no variance contribution.
  }
  if (target_term == 0.0) return core::ExtendedReal(0.0);
  if (environment <= 0.0) return core::ExtendedReal::infinity();
  return core::ExtendedReal(0.5 * static_cast<double>(d) *
                            std::log1p(target_term / environment));
}

void RunningMoments::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double delta = other.mean - mean;
  const double total = static_cast<double>(count + other.count);
  mean += delta * static_cast<double>(other.count) / total;
  m2 += other.m2 + delta * delta * static_cast<double>(count) *
                       static_cast<double>(other.count) / total;
  count += other.count;
}

double RunningMoments::sample_variance() const {
  if (count < 2) return 0.0;
  return m2 / static_cast<double>(count - 1);
}

double RunningMoments::std_error() const {
  if (count < 1) return 0.0;
  return std::sqrt(sample_variance() / static_cast<double>(count));
}

int resolve_thread_count() {
  const char* env = std::getenv("FEDINFO_THREADS");
  long value = 0;
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    value = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || value < 0) value = 0;
  }
  if (value == 0) {
    const unsigned hardware = std::thread::hardware_concurrency();
    value = hardware == 0 ? 1 : static_cast<long>(hardware);
  }
  return static_cast<int>(std::clamp<long>(value, 1, 256));
}

MCEstimate estimate_gen_mc(const core::GaussianPrior& prior, int sample_count,
                           long long trials, const core::SeededRng& rng) {
  core::validate(prior);
  if (sample_count < 1) {
    throw std::invalid_argument("estimate_gen_mc: sample_count must be >= 1");
  }
  require_trials(trials);
  const RunningMoments moments = reduce_blocks(
      trials, kGenBlock, resolve_thread_count(),
      [&](long long begin, long long end, RunningMoments& out) {
        for (long long i = begin; i < end; ++i) {
          core::SeededRng trial_rng = rng.derive(trial_label(i));
          const core::Dataset data =
              core::sample_dataset(prior, sample_count, trial_rng);
          const core::Hypothesis w = paradigms::centralized_erm(data);
          out.add(core::population_risk_gaussian(prior, w) -
                  core::empirical_risk(data, w));
        }
      });
  return finish_estimate(moments, rng);
}

MCEstimate estimate_gen_mc(const paradigms::DistributedConfig& config,
                           long long trials, const core::SeededRng& rng) {
  paradigms::validate(config);
  require_trials(trials);
  const double n = static_cast<double>(config.total_samples());
  const RunningMoments moments = reduce_blocks(
      trials, kGenBlock, resolve_thread_count(),
      [&](long long begin, long long end, RunningMoments& out) {
        for (long long i = begin; i < end; ++i) {
          core::SeededRng trial_rng = rng.derive(trial_label(i));
          const paradigms::DistributedRun run =
              paradigms::run_distributed(config, trial_rng);
          double gap = 0.0;
          for (const core::Dataset& data : run.user_data) {
            const double weight =
                static_cast<double>(data.samples.size()) / n;
            const core::GaussianPrior& prior =
                config.priors[static_cast<std::size_t>(data.owner - 1)];
            gap += weight *
                   (core::population_risk_gaussian(prior, run.global) -
                    core::empirical_risk(data, run.global));
          }
          out.add(gap);
        }
      });
  return finish_estimate(moments, rng);
}

MCEstimate estimate_gen_mc(const paradigms::FederatedConfig& config, int round,
                           long long trials, const core::SeededRng& rng) {
  paradigms::validate(config);
  if (round < 1 || round > config.rounds) {
    throw std::invalid_argument("estimate_gen_mc: round out of range");
  }
  require_trials(trials);
  paradigms::FederatedConfig truncated = config;
  truncated.rounds = round;
  const RunningMoments moments = reduce_blocks(
      trials, kGenBlock, resolve_thread_count(),
      [&](long long begin, long long end, RunningMoments& out) {
        for (long long i = begin; i < end; ++i) {
          core::SeededRng trial_rng = rng.derive(trial_label(i));
          const paradigms::FederatedTrajectory trajectory =
              paradigms::run_federated(truncated, trial_rng);
          const core::Hypothesis& w = trajectory.global_models.back();
          double round_total = 0.0;
          double gap = 0.0;
          for (const core::Dataset& batch : trajectory.batches) {
            if (batch.batch != round) continue;
            const double size = static_cast<double>(batch.samples.size());
            const core::GaussianPrior& prior =
                config.priors[static_cast<std::size_t>(batch.owner - 1)];
            gap += size * (core::population_risk_gaussian(prior, w) -
                           core::empirical_risk(batch, w));
            round_total += size;
          }
          out.add(gap / round_total);
        }
      });
  return finish_estimate(moments, rng);
}

namespace {

// One distinguishable per-round participation outcome, after grouping the
// size-K_a subsets that look identical from the tracked user's vantage
// point: whether the user is active, the round's sample total, the variance
// contributed by the other active users, and their mean contribution.
struct RoundProfile {
  double probability = 0.0;
  bool target_active = false;
  double coefficient = 0.0;        // 1 / (T * n(tau))
  double noise_rate = 0.0;         // sum over other active users of n sigma^2
  core::Vector mean_contribution;  // sum over other active users of n * mean
};

// One mixture component: a joint choice of per-round profiles.
struct MixtureComponent {
  double log_probability = 0.0;
  double variance_known_target = 0.0;    // aggregate variance given all of
                                         // the user's data
  double variance_unknown_target = 0.0;  // ... given all but the target
  double target_coefficient = 0.0;       // 0 when inactive at the target round
  bool target_active = false;
  core::Vector static_mean;              // other users' mean contribution
  std::vector<double> batch_weights;     // per round: coefficient if the
                                         // user is active, else 0
};

struct RoundDraw {
  bool target_active = false;
  double coefficient = 0.0;
  double noise_rate = 0.0;
  core::Vector mean_contribution;
};

RoundDraw summarize_round(const std::vector<int>& active, int user,
                          const paradigms::FederatedConfig& config) {
  RoundDraw draw;
  const int dim = config.priors.front().dim;
  draw.mean_contribution.assign(static_cast<std::size_t>(dim), 0.0);
  double round_total = 0.0;
  for (int k : active) {
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    const double size =
        static_cast<double>(config.batch_size_per_user[idx]);
    round_total += size;
    if (k == user) {
      draw.target_active = true;
      continue;
    }
    draw.noise_rate += size * config.priors[idx].variance;
    for (int i = 0; i < dim; ++i) {
      draw.mean_contribution[static_cast<std::size_t>(i)] +=
          size * config.priors[idx].mean[static_cast<std::size_t>(i)];
    }
  }
  draw.coefficient =
      1.0 / (static_cast<double>(config.rounds) * round_total);
  return draw;
}

std::vector<RoundProfile> enumerate_round_profiles(
    const paradigms::FederatedConfig& config, int user) {
  const int k_total = config.user_count;
  const int k_active = config.active_per_round;
  double subset_count = 1.0;
  for (int i = 0; i < k_active; ++i) {
    subset_count *= static_cast<double>(k_total - i) /
                    static_cast<double>(i + 1);
  }
  subset_count = std::round(subset_count);
  if (subset_count > static_cast<double>(kMaxSubsetsPerRound)) {
    throw std::invalid_argument(
        "privacy_leakage_federated_mc: too many participation subsets per "
        "round to enumerate the mixture; reduce K or K_a");
  }

  using ProfileKey = std::tuple<int, double, double, core::Vector>;
  std::map<ProfileKey, long long> groups;
  std::vector<int> subset(static_cast<std::size_t>(k_active));
  for (int i = 0; i < k_active; ++i) subset[static_cast<std::size_t>(i)] = i + 1;
  for (;;) {
    const RoundDraw draw = summarize_round(subset, user, config);
    ++groups[{draw.target_active ? 1 : 0, draw.coefficient, draw.noise_rate,
              draw.mean_contribution}];
    // Advance to the next size-K_a combination of {1..K}.
    int position = k_active - 1;
    while (position >= 0 &&
           subset[static_cast<std::size_t>(position)] ==
               k_total - (k_active - 1 - position)) {
      --position;
    }
    if (position < 0) break;
    ++subset[static_cast<std::size_t>(position)];
    for (int i = position + 1; i < k_active; ++i) {
      subset[static_cast<std::size_t>(i)] =
          subset[static_cast<std::size_t>(i - 1)] + 1;
    }
  }

  std::vector<RoundProfile> profiles;
  profiles.reserve(groups.size());
  for (const auto& [key, count] : groups) {
    RoundProfile profile;
    profile.target_active = std::get<0>(key) == 1;
    profile.coefficient = std::get<1>(key);
    profile.noise_rate = std::get<2>(key);
    profile.mean_contribution = std::get<3>(key);
    profile.probability = static_cast<double>(count) / subset_count;
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

std::vector<MixtureComponent> build_components(
    const std::vector<RoundProfile>& profiles, int rounds, int target_round,
    double target_variance, int dim) {
  double projected = 1.0;
  for (int t = 0; t < rounds; ++t) {
    projected *= static_cast<double>(profiles.size());
    if (projected > static_cast<double>(kMaxMixtureComponents)) {
      throw std::invalid_argument(
          "privacy_leakage_federated_mc: the participation mixture has too "
          "many components; reduce T or the per-round profile variety");
    }
  }
  std::vector<MixtureComponent> components;
  std::vector<std::size_t> odometer(static_cast<std::size_t>(rounds), 0);
  for (;;) {
    MixtureComponent component;
    component.static_mean.assign(static_cast<std::size_t>(dim), 0.0);
    component.batch_weights.assign(static_cast<std::size_t>(rounds), 0.0);
    for (int t = 0; t < rounds; ++t) {
      const RoundProfile& profile = profiles[odometer[static_cast<std::size_t>(t)]];
      component.log_probability += std::log(profile.probability);
      component.variance_known_target +=
          profile.coefficient * profile.coefficient * profile.noise_rate;
      if (profile.target_active) {
        component.batch_weights[static_cast<std::size_t>(t)] =
            profile.coefficient;
      }
      for (int i = 0; i < dim; ++i) {
        component.static_mean[static_cast<std::size_t>(i)] +=
            profile.coefficient *
            profile.mean_contribution[static_cast<std::size_t>(i)];
      }
      if (t == target_round - 1) {
        component.target_active = profile.target_active;
        component.target_coefficient =
            profile.target_active ? profile.coefficient : 0.0;
      }
    }
    component.variance_unknown_target =
        component.variance_known_target +
        component.target_coefficient * component.target_coefficient *
            target_variance;
    components.push_back(std::move(component));

    std::size_t position = 0;
    while (position < odometer.size()) {
      if (++odometer[position] < profiles.size()) break;
      odometer[position] = 0;
      ++position;
    }
    if (position == odometer.size()) break;
  }
  return components;
}

double log_sum_exp(const std::vector<double>& values) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v);
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

}  // namespace

LeakageEstimate privacy_leakage_federated_mc(
    const paradigms::FederatedConfig& config, int user, int target_round,
    int target_index, long long pattern_trials, long long entropy_trials,
    const core::SeededRng& rng, double convergence_tol) {
  paradigms::validate(config);
  if (user < 1 || user > config.user_count) {
    throw std::invalid_argument(
        "privacy_leakage_federated_mc: user outside 1..K");
  }
  if (target_round < 1 || target_round > config.rounds) {
    throw std::invalid_argument(
        "privacy_leakage_federated_mc: target round outside 1..T");
  }
  const std::size_t user_idx = static_cast<std::size_t>(user - 1);
  const int batch_size = config.batch_size_per_user[user_idx];
  if (target_index < 1 || target_index > batch_size) {
    throw std::invalid_argument(
        "privacy_leakage_federated_mc: target index outside the user's "
        "batch");
  }
  require_trials(pattern_trials);
  if (entropy_trials < 1) {
    throw std::invalid_argument(
        "privacy_leakage_federated_mc: entropy_trials must be >= 1");
  }

  const core::GaussianPrior& target_prior = config.priors[user_idx];
  const int dim = target_prior.dim;
  const double target_variance = target_prior.variance;
  const int rounds = config.rounds;

  const std::vector<RoundProfile> profiles =
      enumerate_round_profiles(config, user);
  const std::vector<MixtureComponent> components =
      build_components(profiles, rounds, target_round, target_variance, dim);

  LeakageEstimate estimate;
  estimate.pattern_trials = pattern_trials;
  estimate.entropy_trials = entropy_trials;
  estimate.seed = rng.seed();

  // Structural unboundedness: on some positive-probability history the
  // aggregate is a noiseless function of the user's own data and still uses
  // the target sample, so observing it can reveal the target exactly.
  for (const MixtureComponent& component : components) {
    if (component.target_active && component.variance_known_target == 0.0) {
      estimate.value = core::ExtendedReal::infinity();
      estimate.raw_mean = std::numeric_limits<double>::infinity();
      estimate.std_error = 0.0;
      estimate.converged = true;
      return estimate;
    }
  }

  const auto pattern_work = [&](long long begin, long long end,
                                RunningMoments& out) {
    std::vector<double> numerator_terms(components.size());
    std::vector<double> denominator_terms(components.size());
    std::vector<core::Vector> known_means(components.size());
    std::vector<core::Vector> unknown_means(components.size());
    core::Vector aggregate(static_cast<std::size_t>(dim));
    for (long long p = begin; p < end; ++p) {
      core::SeededRng pattern_rng =
          rng.derive("pattern:" + std::to_string(p));

      // True history, then the user's full pre-partitioned data: one batch
      // per round, whether or not the user ends up active there.
      std::vector<RoundDraw> history;
      history.reserve(static_cast<std::size_t>(rounds));
      for (int t = 1; t <= rounds; ++t) {
        const std::vector<int> active = paradigms::sample_participants(
            config.user_count, config.active_per_round, pattern_rng);
        history.push_back(summarize_round(active, user, config));
      }
      std::vector<core::Vector> batch_sums;
      batch_sums.reserve(static_cast<std::size_t>(rounds));
      core::Vector target_sample;
      for (int t = 1; t <= rounds; ++t) {
        const core::Dataset batch =
            core::sample_dataset(target_prior, batch_size, pattern_rng);
        core::Vector sum(static_cast<std::size_t>(dim), 0.0);
        for (const core::Vector& sample : batch.samples) {
          for (int i = 0; i < dim; ++i) {
            sum[static_cast<std::size_t>(i)] +=
                sample[static_cast<std::size_t>(i)];
          }
        }
        batch_sums.push_back(std::move(sum));
        if (t == target_round) {
          target_sample =
              batch.samples[static_cast<std::size_t>(target_index - 1)];
        }
      }

      // Conditional law of the aggregate under the realized history.
      core::Vector true_mean(static_cast<std::size_t>(dim), 0.0);
      double true_variance = 0.0;
      for (int t = 0; t < rounds; ++t) {
        const RoundDraw& draw = history[static_cast<std::size_t>(t)];
        true_variance += draw.coefficient * draw.coefficient * draw.noise_rate;
        for (int i = 0; i < dim; ++i) {
          true_mean[static_cast<std::size_t>(i)] +=
              draw.coefficient *
              draw.mean_contribution[static_cast<std::size_t>(i)];
          if (draw.target_active) {
            true_mean[static_cast<std::size_t>(i)] +=
                draw.coefficient *
                batch_sums[static_cast<std::size_t>(t)]
                          [static_cast<std::size_t>(i)];
          }
        }
      }

      // Per-component conditional means for this trial's user data.
      for (std::size_t c = 0; c < components.size(); ++c) {
        const MixtureComponent& component = components[c];
        core::Vector mean = component.static_mean;
        for (int t = 0; t < rounds; ++t) {
          const double weight =
              component.batch_weights[static_cast<std::size_t>(t)];
          if (weight == 0.0) continue;
          for (int i = 0; i < dim; ++i) {
            mean[static_cast<std::size_t>(i)] +=
                weight * batch_sums[static_cast<std::size_t>(t)]
                                   [static_cast<std::size_t>(i)];
          }
        }
        core::Vector hidden = mean;
        if (component.target_coefficient != 0.0) {
          for (int i = 0; i < dim; ++i) {
            hidden[static_cast<std::size_t>(i)] -=
                component.target_coefficient *
                (target_sample[static_cast<std::size_t>(i)] -
                 target_prior.mean[static_cast<std::size_t>(i)]);
          }
        }
        known_means[c] = std::move(mean);
        unknown_means[c] = std::move(hidden);
      }

      const double true_sigma = std::sqrt(true_variance);
      double ratio_sum = 0.0;
      for (long long e = 0; e < entropy_trials; ++e) {
        for (int i = 0; i < dim; ++i) {
          aggregate[static_cast<std::size_t>(i)] =
              true_mean[static_cast<std::size_t>(i)] +
              true_sigma * pattern_rng.normal();
        }
        for (std::size_t c = 0; c < components.size(); ++c) {
          const MixtureComponent& component = components[c];
          numerator_terms[c] =
              component.log_probability +
              log_gaussian_density(aggregate, known_means[c],
                                   component.variance_known_target);
          denominator_terms[c] =
              component.log_probability +
              log_gaussian_density(aggregate, unknown_means[c],
                                   component.variance_unknown_target);
        }
        ratio_sum +=
            log_sum_exp(numerator_terms) - log_sum_exp(denominator_terms);
      }
      out.add(ratio_sum / static_cast<double>(entropy_trials));
    }
  };

  const RunningMoments moments = reduce_blocks(
      pattern_trials, kPatternBlock, resolve_thread_count(), pattern_work);

  estimate.raw_mean = moments.mean;
  estimate.value = core::ExtendedReal(std::max(0.0, moments.mean));
  estimate.std_error = moments.std_error();
  estimate.converged =
      convergence_tol <= 0.0 || estimate.std_error <= convergence_tol;
  return estimate;
}

}  // namespace fedinfo::estimators
