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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedinfo/core.hpp"
#include "fedinfo/paradigms.hpp"

namespace fedinfo::bounds {

enum class Side { plus, minus };

// Convex upper envelope psi of a cumulant generating function on [0, b),
// with psi(0) = psi'(0) = 0. Converts per-sample mutual information into a
// risk-gap contribution through the inverse of its Legendre dual.
struct PsiEnvelope {
  std::function<double(double)> psi;
  double domain_bound = 0.0;  // b, may be +infinity
  Side side = Side::minus;
  // Exact shortcut for the all-zero envelope, whose dual inverse is
  // identically 0; skips the numeric minimization.
  bool dual_inverse_is_zero = false;
};

// Quadratic envelope psi(lambda) = R^2 lambda^2 / 2 on [0, inf); its dual
// inverse is sqrt(2 R^2 u). Throws when R <= 0.
PsiEnvelope subgaussian_envelope(double r, Side side = Side::minus);

// The identically-zero envelope; its dual inverse is identically 0.
PsiEnvelope zero_envelope(Side side = Side::plus);

// Envelope whose dual inverse equals slope * sqrt(u): the quadratic envelope
// with R = slope / sqrt(2). slope must be >= 0; slope 0 yields the zero
// envelope.
PsiEnvelope envelope_for_sqrt_dual(double slope, Side side = Side::minus);

// psi*^-1(u) = inf over lambda in (0, b) of (u + psi(lambda)) / lambda,
// found by a geometric bracket scan plus golden-section refinement (the
// objective is unimodal for convex psi). Returns exactly 0 at u = 0. Throws
// std::invalid_argument for u < 0 and std::runtime_error (with bracket
// diagnostics) if the minimizer fails to converge.
double legendre_dual_inverse(const PsiEnvelope& envelope, double u);

// Lower/upper generalization bounds assembled from per-sample mutual
// information. analytic_gen is filled by callers that know the closed form.
struct BoundReport {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> analytic_gen;
  std::vector<double> per_sample_mi;
  std::string config_summary;
};

struct EnvelopePair {
  PsiEnvelope plus;
  PsiEnvelope minus;
};

// lower = -(1/n) sum psi_plus*^-1(I_i), upper = (1/n) sum psi_minus*^-1(I_i)
// over the n per-sample mutual information values.
BoundReport gen_bounds_centralized(const std::vector<double>& mi_per_sample,
                                   const PsiEnvelope& psi_plus,
                                   const PsiEnvelope& psi_minus);

// Same sums with weight 1/n over every (user, sample) cell; mi[k] must have
// sizes[k] entries and envelopes supplies the per-user psi pair.
BoundReport gen_bounds_distributed(const std::vector<std::vector<double>>& mi,
                                   const std::vector<int>& sizes,
                                   const std::vector<EnvelopePair>& envelopes);

// Per-pattern bound at the given round: weight 1 / n(t) over the active
// users' current batches. mi_active maps each active user to its per-sample
// values; envelopes is indexed by user (length K). The expectation over
// random participation is approximated by averaging per-pattern reports with
// average_bound_reports.
BoundReport gen_bounds_federated(
    const std::map<int, std::vector<double>>& mi_active,
    const paradigms::ParticipationLog& participation, int round,
    const std::vector<EnvelopePair>& envelopes);

// Arithmetic mean of lower, upper, and (when present everywhere) analytic
// values over sampled participation patterns.
BoundReport average_bound_reports(const std::vector<BoundReport>& reports);

// Exact per-configuration values: generalization error, per-sample mutual
// information, per-user conditional leakage, and the dual-inverse functions
// (the minus side is slope * sqrt(u), the plus side is identically 0).
struct ClosedFormReport {
  double gen = 0.0;
  // Federated only: the variant with the active-user count in the
  // denominator, gen * K / K_a. Monte Carlo runs adjudicate between the two
  // when K_a < K.
  std::optional<double> gen_active_users;
  double mi_per_sample = 0.0;
  // Absent when no closed form exists (federated with partial
  // participation); +infinity when the output is deterministic given one
  // user's data (single-user configurations).
  std::optional<core::ExtendedReal> priv_per_user;
  std::function<double(double)> psi_minus_inverse;
  std::function<double(double)> psi_plus_inverse;
  double psi_minus_slope = 0.0;
};

// Single user, n samples of an isotropic prior:
//   gen = 2 variance d / n, mi = (d/2) log(n / (n-1)), priv = +infinity,
//   psi_minus*^-1(u) = 2 variance sqrt(d u) (1 + 1/n).
// Throws when n < 2 (the mutual information is undefined at n = 1).
ClosedFormReport centralized_closed_forms(int n, int d, double variance);

// K users with sizes n_k and variances sigma_k^2, all priors sharing d:
//   gen = 2 d (sum n_i sigma_i^2) / n^2,
//   mi_k = (d/2) log(1 + sigma_k^2 / (sum n_i sigma_i^2 - sigma_k^2)),
//   priv_k = (d/2) log(1 + sigma_k^2 / sum_{i != k} n_i sigma_i^2),
//   psi_minus*^-1(u) = 2 sqrt(d u) (sum n_i sigma_i^2 / n^2 + sigma_k^2).
// priv is +infinity when K = 1. One report per user, in user order.
std::vector<ClosedFormReport> distributed_closed_forms(
    const std::vector<int>& sizes, const std::vector<double>& variances,
    int d);

// Equal-parameter federated protocol evaluated at round t with batch size n,
// K users, K_a active per round:
//   gen = 2 d variance / (t n K), gen_active_users = 2 d variance / (t n K_a),
//   mi = (d/2) log(1 + 1 / (t n K_a - 1)),
//   psi_minus*^-1(u) = 2 sqrt(d) (1 + 1/(t n K_a)) variance sqrt(u).
// priv has a closed form only under full participation:
//   (d/2) log(1 + 1 / (t n (K - 1))), +infinity when K = 1.
// Throws when t * n * K_a < 2.
ClosedFormReport federated_closed_forms(int t, int n, int user_count,
                                        int active, double variance, int d);

}  // namespace fedinfo::bounds
