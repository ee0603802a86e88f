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

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

#include "fedinfo/core.hpp"
#include "fedinfo/paradigms.hpp"

namespace fedinfo::estimators {

// Identifies one raw sample: 1-based user, round (0 for non-federated data),
// 1-based index within the batch.
struct SampleKey {
  int user = 1;
  int round = 0;
  int index = 1;
  auto operator<=>(const SampleKey&) const = default;
};

// Exact representation of an aggregated hypothesis as a linear combination
// of raw samples plus a constant vector (zero for every aggregation rule
// here). This is the basis of all analytic Gaussian information quantities.
struct LinearCoefficientMap {
  std::map<SampleKey, double> coefficients;
  core::Vector constant;

  // 0 when the sample does not appear in the combination.
  double coefficient(const SampleKey& key) const;
  double coefficient_sum() const;
};

// Centralized sample mean over `sample_count` draws: every coefficient is
// 1 / sample_count (user 1, round 0).
LinearCoefficientMap extract_coefficients(int sample_count);

// Distributed weighted-average fusion: coefficient 1 / n on every sample.
LinearCoefficientMap extract_coefficients(
    const paradigms::DistributedConfig& config);

// Federated recursion unrolled over the logged rounds; the aggregate after
// the last logged round assigns every round-tau sample of an active user the
// coefficient 1 / (T * n(tau)). Pass a truncated log to analyze an earlier
// round.
LinearCoefficientMap extract_coefficients(
    const paradigms::FederatedConfig& config,
    const paradigms::ParticipationLog& participation);

// Applies the combination to raw data; batches are matched to keys by their
// (owner, batch) fields. Throws when a referenced sample is missing.
core::Hypothesis apply_coefficients(const LinearCoefficientMap& map,
                                    const std::vector<core::Dataset>& batches);

// Mutual information (nats) between the target sample and the aggregate,
// for independent isotropic Gaussian samples with per-user variances:
//   (d/2) log(V / (V - c^2 sigma^2)) with V the aggregate variance per
// dimension. Returns 0 when the target's coefficient is 0; throws when the
// aggregate variance, or the variance given the target, is 0.
double gaussian_mi(const LinearCoefficientMap& map,
                   const std::vector<double>& variances,
                   const SampleKey& target, int d);

// Conditional leakage I(target; aggregate | owner's other samples) for a
// deterministic aggregation pattern. Conditioning on the owner's other
// samples freezes their contribution, so only other users' variance remains:
//   (d/2) log(1 + c^2 sigma_k^2 / v_env). Returns +infinity when v_env = 0
// and the target still enters the aggregate (single-user configurations).
core::ExtendedReal privacy_leakage_conditional(
    const LinearCoefficientMap& map, const std::vector<double>& variances,
    const SampleKey& target, int d);

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long trials = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo expected generalization error: per trial, run the paradigm and
// record (population risk - empirical risk) of the returned aggregate on the
// trial's own data. Trials use independent derived streams and a fixed block
// reduction, so results are identical for any worker count. trials >= 100.
MCEstimate estimate_gen_mc(const core::GaussianPrior& prior, int sample_count,
                           long long trials, const core::SeededRng& rng);
MCEstimate estimate_gen_mc(const paradigms::DistributedConfig& config,
                           long long trials, const core::SeededRng& rng);
// Federated variant evaluated at the given round (1-based), using the
// round's active batches for the empirical term.
MCEstimate estimate_gen_mc(const paradigms::FederatedConfig& config, int round,
                           long long trials, const core::SeededRng& rng);

// Result of the mixture-based leakage estimator. value is clamped to >= 0
// (or +infinity when leakage is structurally unbounded); raw_mean keeps the
// unclamped average for diagnostics. std_error is the cluster standard error
// over pattern means.
struct LeakageEstimate {
  core::ExtendedReal value;
  double std_error = 0.0;
  double raw_mean = 0.0;
  long long pattern_trials = 0;
  long long entropy_trials = 0;
  std::uint64_t seed = 0;
  bool converged = true;
};

// Estimates I(S_{k,j*}^(t*); aggregate after the final round | user k's
// other samples) under random participation. Conditioned on a participation
// history the aggregate is Gaussian with coefficients from the unrolled
// recursion, so its conditional law is a finite Gaussian mixture over
// histories; the estimator samples (history, user-k data, aggregate) from
// the true joint law and averages exact mixture log-density ratios.
// pattern_trials histories/data draws, entropy_trials aggregate draws each.
// +infinity is detected structurally: some positive-probability mixture
// component uses the target but carries no other user's noise (only
// reachable with a single active user). When convergence_tol > 0 the
// converged flag records whether std_error met it.
LeakageEstimate privacy_leakage_federated_mc(
    const paradigms::FederatedConfig& config, int user, int target_round,
    int target_index, long long pattern_trials, long long entropy_trials,
    const core::SeededRng& rng, double convergence_tol = 0.0);

// Streaming mean/variance accumulator with an order-independent merge, used
// for the deterministic block reductions.
struct RunningMoments {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningMoments& other);
  double sample_variance() const;  // unbiased; 0 when count < 2
  double std_error() const;
};

// Worker budget for Monte Carlo loops: the FEDINFO_THREADS environment
// variable, where 0, absence, or garbage means the hardware concurrency.
int resolve_thread_count();

}  // namespace fedinfo::estimators
