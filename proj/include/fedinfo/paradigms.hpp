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

#include <map>
#include <vector>

#include "fedinfo/core.hpp"

namespace fedinfo::paradigms {

// One-shot distributed learning: K users hold independent datasets of sizes
// n_k drawn from per-user priors, and a server fuses their local models.
struct DistributedConfig {
  int user_count = 1;                         // K
  std::vector<int> samples_per_user;          // n_k, length K
  std::vector<core::GaussianPrior> priors;    // length K

  int total_samples() const;                  // n = sum of n_k

  // Equal-parameter shorthand: every user holds `samples` draws from the
  // same isotropic prior.
  static DistributedConfig equal(int user_count, int samples, int dim,
                                 double variance);
};

void validate(const DistributedConfig& config);

// Multi-round federated learning: at each round a uniformly random subset of
// active_per_round users draws a fresh batch and updates its local model
// from the previous global model; the server aggregates the active locals.
struct FederatedConfig {
  int user_count = 1;                          // K
  int rounds = 1;                              // T
  std::vector<int> batch_size_per_user;        // n_k, constant across rounds
  int active_per_round = 1;                    // K_a
  std::vector<core::GaussianPrior> priors;

  static FederatedConfig equal(int user_count, int active_per_round,
                               int rounds, int batch_size, int dim,
                               double variance);
};

void validate(const FederatedConfig& config);

// Realized active sets, one sorted list of 1-based user indices per round.
struct ParticipationLog {
  std::vector<std::vector<int>> active_sets;

  // Full participation by all user_count users for every round.
  static ParticipationLog full(int user_count, int rounds);
};

// Everything produced by one federated run: the global model after each
// round, the active users' local models, the realized participation, and
// every sampled batch (batch field set to the round index).
struct FederatedTrajectory {
  std::vector<core::Hypothesis> global_models;
  std::vector<std::map<int, core::Hypothesis>> local_models;
  ParticipationLog participation;
  std::vector<core::Dataset> batches;
};

// Sample mean, the exact empirical squared-error risk minimizer.
core::Hypothesis centralized_erm(const core::Dataset& data);

// Same computation as centralized_erm, applied to a single user's data.
core::Hypothesis local_erm(const core::Dataset& data);

// Convex combination of models; weights must sum to 1 within 1e-12.
core::Hypothesis fuse_weighted_average(
    const std::vector<core::Hypothesis>& models,
    const std::vector<double>& weights);

struct DistributedRun {
  core::Hypothesis global;
  std::vector<core::Dataset> user_data;
};

// Samples every user's dataset (users in ascending order), runs local ERM,
// and fuses with weights n_k / n.
DistributedRun run_distributed(const DistributedConfig& config,
                               core::SeededRng& rng);

// Uniformly random size-`active` subset of {1..user_count}, sorted. When
// active == user_count the full set is returned without consuming draws, so
// full-participation runs line up with distributed runs stream for stream.
std::vector<int> sample_participants(int user_count, int active,
                                     core::SeededRng& rng);

struct RoundResult {
  core::Hypothesis global;
  std::map<int, core::Hypothesis> locals;
};

// One federated round at index t >= 1: each active user k computes
//   W_k = (1 / (t * n_k)) * sum of its fresh batch + ((t-1)/t) * prev_global
// and the server fuses the active locals with weights n_k / n(t). Batches
// must be supplied exactly for the active set.
RoundResult federated_round(const core::Hypothesis& prev_global,
                            int round_index,
                            const std::map<int, core::Dataset>& batches,
                            const std::vector<int>& active);

// Runs the full protocol for config.rounds rounds. Per round, participation
// is sampled first, then active users' batches in ascending user order;
// inactive users' batches are never drawn since they cannot affect any
// output.
FederatedTrajectory run_federated(const FederatedConfig& config,
                                  core::SeededRng& rng);

}  // namespace fedinfo::paradigms
