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

#include "fedinfo/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fedinfo::bounds {
namespace {

constexpr double kLambdaCap = 1e18;
constexpr double kRelTol = 1e-10;

// Sampled sanity check of the envelope contract: psi(0) = 0, small slope at
// the origin, nondecreasing, convex. Catches gross misuse, not adversarial
// functions.
void check_envelope(const std::function<double(double)>& psi,
                    double domain_bound) {
  if (!psi) {
    throw std::invalid_argument("PsiEnvelope: evaluator must be callable");
  }
  if (!(domain_bound > 0.0)) {
    throw std::invalid_argument("PsiEnvelope: domain bound must be > 0");
  }
  if (std::abs(psi(0.0)) > 1e-12) {
    throw std::invalid_argument("PsiEnvelope: psi(0) must be 0");
  }
  const double span = std::isfinite(domain_bound)
                          ? 0.99 * std::min(domain_bound, 4.0)
                          : 4.0;
  constexpr int kPoints = 16;
  double values[kPoints + 1];
  values[0] = 0.0;
  for (int i = 1; i <= kPoints; ++i) {
    const double lambda = span * static_cast<double>(i) / kPoints;
    values[i] = psi(lambda);
    if (!std::isfinite(values[i]) || values[i] < values[i - 1] - 1e-12) {
      throw std::invalid_argument(
          "PsiEnvelope: psi must be finite and nondecreasing on its domain");
    }
  }
  for (int i = 1; i < kPoints; ++i) {
    const double bend = values[i - 1] + values[i + 1] - 2.0 * values[i];
    if (bend < -1e-9 * std::max(1.0, std::abs(values[i]))) {
      throw std::invalid_argument("PsiEnvelope: psi must be convex");
    }
  }
  // Slope near 0 must be negligible against the average slope over the span.
  const double h = span * 1e-4;
  const double slope0 = psi(h) / h;
  const double slope_avg = values[kPoints] / span;
  if (slope0 > std::max(0.01 * slope_avg, 1e-12)) {
    throw std::invalid_argument("PsiEnvelope: psi'(0) must be 0");
  }
}

double weighted_dual_sum(const std::vector<double>& mi,
                         const PsiEnvelope& envelope) {
  double total = 0.0;
  for (double value : mi) {
    if (value < 0.0) {
      throw std::invalid_argument(
          "gen bounds: mutual information must be >= 0");
    }
    total += legendre_dual_inverse(envelope, value);
  }
  return total;
}

}  // namespace

PsiEnvelope subgaussian_envelope(double r, Side side) {
  if (!(r > 0.0)) {
    throw std::invalid_argument("subgaussian_envelope: R must be > 0");
  }
  PsiEnvelope envelope;
  const double r2 = r * r;
  envelope.psi = [r2](double lambda) { return 0.5 * r2 * lambda * lambda; };
  envelope.domain_bound = std::numeric_limits<double>::infinity();
  envelope.side = side;
  check_envelope(envelope.psi, envelope.domain_bound);
  return envelope;
}

PsiEnvelope zero_envelope(Side side) {
  PsiEnvelope envelope;
  envelope.psi = [](double) { return 0.0; };
  envelope.domain_bound = std::numeric_limits<double>::infinity();
  envelope.side = side;
  envelope.dual_inverse_is_zero = true;
  return envelope;
}

PsiEnvelope envelope_for_sqrt_dual(double slope, Side side) {
  if (slope < 0.0) {
    throw std::invalid_argument("envelope_for_sqrt_dual: slope must be >= 0");
  }
  if (slope == 0.0) return zero_envelope(side);
  return subgaussian_envelope(slope / std::sqrt(2.0), side);
}

double legendre_dual_inverse(const PsiEnvelope& envelope, double u) {
  if (!(u >= 0.0)) {
    throw std::invalid_argument("legendre_dual_inverse: u must be >= 0");
  }
  if (envelope.dual_inverse_is_zero || u == 0.0) return 0.0;
  if (!envelope.psi) {
    throw std::invalid_argument("legendre_dual_inverse: empty envelope");
  }
  check_envelope(envelope.psi, envelope.domain_bound);

  const auto objective = [&](double lambda) {
    return (u + envelope.psi(lambda)) / lambda;
  };

  // Geometric scan from the top of the domain down finds a 4x bracket around
  // the minimizer of the unimodal objective.
  const double top = std::isfinite(envelope.domain_bound)
                         ? envelope.domain_bound * (1.0 - 1e-9)
                         : kLambdaCap;
  constexpr int kScanSteps = 160;
  int best_index = 0;
  double best_value = objective(top);
  double lambda = top;
  for (int i = 1; i <= kScanSteps; ++i) {
    lambda *= 0.5;
    const double value = objective(lambda);
    if (value < best_value) {
      best_value = value;
      best_index = i;
    }
  }
  double lo = top * std::pow(0.5, std::min(best_index + 1, kScanSteps));
  double hi = top * std::pow(0.5, std::max(best_index - 1, 0));

  // Golden-section refinement.
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  best_value = std::min({best_value, f1, f2});
  int iterations = 0;
  constexpr int kMaxIterations = 400;
  while (hi - lo > kRelTol * lo) {
    if (++iterations > kMaxIterations) {
      std::ostringstream diag;
      diag << "legendre_dual_inverse: no convergence after " << kMaxIterations
           << " iterations (u=" << u << ", bracket=[" << lo << ", " << hi
           << "])";
      throw std::runtime_error(diag.str());
    }
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = objective(x2);
    }
    best_value = std::min({best_value, f1, f2});
  }
  return best_value;
}

BoundReport gen_bounds_centralized(const std::vector<double>& mi_per_sample,
                                   const PsiEnvelope& psi_plus,
                                   const PsiEnvelope& psi_minus) {
  if (mi_per_sample.empty()) {
    throw std::invalid_argument(
        "gen_bounds_centralized: need at least one mutual information value");
  }
  const double n = static_cast<double>(mi_per_sample.size());
  BoundReport report;
  // The +0.0 keeps a vanishing positive-side dual from rendering as -0.
  report.lower = -weighted_dual_sum(mi_per_sample, psi_plus) / n + 0.0;
  report.upper = weighted_dual_sum(mi_per_sample, psi_minus) / n;
  report.per_sample_mi = mi_per_sample;
  std::ostringstream summary;
  summary << "centralized n=" << mi_per_sample.size();
  report.config_summary = summary.str();
  return report;
}

BoundReport gen_bounds_distributed(const std::vector<std::vector<double>>& mi,
                                   const std::vector<int>& sizes,
                                   const std::vector<EnvelopePair>& envelopes) {
  if (mi.empty() || mi.size() != sizes.size() ||
      mi.size() != envelopes.size()) {
    throw std::invalid_argument(
        "gen_bounds_distributed: mi, sizes, and envelopes must describe the "
        "same users");
  }
  double n = 0.0;
  double lower_sum = 0.0;
  double upper_sum = 0.0;
  BoundReport report;
  for (std::size_t k = 0; k < mi.size(); ++k) {
    if (mi[k].size() != static_cast<std::size_t>(sizes[k])) {
      throw std::invalid_argument(
          "gen_bounds_distributed: mi row length must equal the user's size");
    }
    n += static_cast<double>(sizes[k]);
    lower_sum += weighted_dual_sum(mi[k], envelopes[k].plus);
    upper_sum += weighted_dual_sum(mi[k], envelopes[k].minus);
    report.per_sample_mi.insert(report.per_sample_mi.end(), mi[k].begin(),
                                mi[k].end());
  }
  report.lower = -lower_sum / n + 0.0;
  report.upper = upper_sum / n;
  std::ostringstream summary;
  summary << "distributed K=" << mi.size() << " n=" << n;
  report.config_summary = summary.str();
  return report;
}

BoundReport gen_bounds_federated(
    const std::map<int, std::vector<double>>& mi_active,
    const paradigms::ParticipationLog& participation, int round,
    const std::vector<EnvelopePair>& envelopes) {
  if (round < 1 ||
      static_cast<std::size_t>(round) > participation.active_sets.size()) {
    throw std::invalid_argument("gen_bounds_federated: round out of range");
  }
  const std::vector<int>& active =
      participation.active_sets[static_cast<std::size_t>(round - 1)];
  if (mi_active.size() != active.size()) {
    throw std::invalid_argument(
        "gen_bounds_federated: mi must cover exactly the round's active set");
  }
  double n = 0.0;
  double lower_sum = 0.0;
  double upper_sum = 0.0;
  BoundReport report;
  for (int k : active) {
    const auto it = mi_active.find(k);
    if (it == mi_active.end()) {
      throw std::invalid_argument(
          "gen_bounds_federated: missing mi for an active user");
    }
    if (k < 1 || static_cast<std::size_t>(k) > envelopes.size()) {
      throw std::invalid_argument(
          "gen_bounds_federated: envelope list does not cover user indices");
    }
    const EnvelopePair& pair = envelopes[static_cast<std::size_t>(k - 1)];
    n += static_cast<double>(it->second.size());
    lower_sum += weighted_dual_sum(it->second, pair.plus);
    upper_sum += weighted_dual_sum(it->second, pair.minus);
    report.per_sample_mi.insert(report.per_sample_mi.end(),
                                it->second.begin(), it->second.end());
  }
  report.lower = -lower_sum / n + 0.0;
  report.upper = upper_sum / n;
  std::ostringstream summary;
  summary << "federated round=" << round << " active=" << active.size()
          << " n(t)=" << n;
  report.config_summary = summary.str();
  return report;
}

BoundReport average_bound_reports(const std::vector<BoundReport>& reports) {
  if (reports.empty()) {
    throw std::invalid_argument("average_bound_reports: no reports");
  }
  BoundReport mean;
  double analytic_sum = 0.0;
  bool analytic_everywhere = true;
  for (const BoundReport& report : reports) {
    mean.lower += report.lower;
    mean.upper += report.upper;
    if (report.analytic_gen.has_value()) {
      analytic_sum += *report.analytic_gen;
    } else {
      analytic_everywhere = false;
    }
  }
  const double count = static_cast<double>(reports.size());
  mean.lower /= count;
  mean.upper /= count;
  if (analytic_everywhere) mean.analytic_gen = analytic_sum / count;
  std::ostringstream summary;
  summary << reports.front().config_summary << " (mean of " << reports.size()
          << " patterns)";
  mean.config_summary = summary.str();
  return mean;
}

ClosedFormReport centralized_closed_forms(int n, int d, double variance) {
  if (n < 2) {
    throw std::invalid_argument(
        "centralized_closed_forms: requires n >= 2 (per-sample mutual "
        "information is undefined at n = 1)");
  }
  if (d < 1 || !(variance > 0.0)) {
    throw std::invalid_argument(
        "centralized_closed_forms: requires d >= 1 and variance > 0");
  }
  ClosedFormReport report;
  const double dn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  report.gen = 2.0 * variance * dd / dn;
  report.mi_per_sample = 0.5 * dd * std::log1p(1.0 / (dn - 1.0));
  report.priv_per_user = core::ExtendedReal::infinity();
  report.psi_minus_slope = 2.0 * variance * std::sqrt(dd) * (1.0 + 1.0 / dn);
  const double slope = report.psi_minus_slope;
  report.psi_minus_inverse = [slope](double u) { return slope * std::sqrt(u); };
  report.psi_plus_inverse = [](double) { return 0.0; };
  return report;
}

std::vector<ClosedFormReport> distributed_closed_forms(
    const std::vector<int>& sizes, const std::vector<double>& variances,
    int d) {
  if (sizes.empty() || sizes.size() != variances.size()) {
    throw std::invalid_argument(
        "distributed_closed_forms: sizes and variances must align and be "
        "non-empty");
  }
  if (d < 1) {
    throw std::invalid_argument("distributed_closed_forms: requires d >= 1");
  }
  double n = 0.0;
  double weighted_variance = 0.0;  // sum of n_i sigma_i^2
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1 || !(variances[i] > 0.0)) {
      throw std::invalid_argument(
          "distributed_closed_forms: requires n_k >= 1 and variances > 0");
    }
    n += static_cast<double>(sizes[i]);
    weighted_variance += static_cast<double>(sizes[i]) * variances[i];
  }
  const double dd = static_cast<double>(d);
  const double gen = 2.0 * dd * weighted_variance / (n * n);

  std::vector<ClosedFormReport> reports;
  reports.reserve(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    ClosedFormReport report;
    report.gen = gen;
    const double mi_denominator = weighted_variance - variances[k];
    if (!(mi_denominator > 0.0)) {
      throw std::invalid_argument(
          "distributed_closed_forms: requires sum of n_i sigma_i^2 > "
          "sigma_k^2");
    }
    report.mi_per_sample =
        0.5 * dd * std::log1p(variances[k] / mi_denominator);
    const double others =
        weighted_variance - static_cast<double>(sizes[k]) * variances[k];
    if (others > 0.0) {
      report.priv_per_user =
          core::ExtendedReal(0.5 * dd * std::log1p(variances[k] / others));
    } else {
      report.priv_per_user = core::ExtendedReal::infinity();
    }
    report.psi_minus_slope =
        2.0 * std::sqrt(dd) * (weighted_variance / (n * n) + variances[k]);
    const double slope = report.psi_minus_slope;
    report.psi_minus_inverse = [slope](double u) {
      return slope * std::sqrt(u);
    };
    report.psi_plus_inverse = [](double) { return 0.0; };
    reports.push_back(std::move(report));
  }
  return reports;
}

ClosedFormReport federated_closed_forms(int t, int n, int user_count,
                                        int active, double variance, int d) {
  if (t < 1 || n < 1 || user_count < 1 || active < 1 ||
      active > user_count) {
    throw std::invalid_argument(
        "federated_closed_forms: requires t >= 1, n >= 1, and 1 <= K_a <= K");
  }
  if (d < 1 || !(variance > 0.0)) {
    throw std::invalid_argument(
        "federated_closed_forms: requires d >= 1 and variance > 0");
  }
  const double used =
      static_cast<double>(t) * static_cast<double>(n) * static_cast<double>(active);
  if (used < 2.0) {
    throw std::invalid_argument(
        "federated_closed_forms: requires t*n*K_a >= 2 (per-sample mutual "
        "information is undefined for a single used sample)");
  }
  const double dd = static_cast<double>(d);
  ClosedFormReport report;
  report.gen = 2.0 * dd * variance /
               (static_cast<double>(t) * static_cast<double>(n) *
                static_cast<double>(user_count));
  report.gen_active_users = 2.0 * dd * variance / used;
  report.mi_per_sample = 0.5 * dd * std::log1p(1.0 / (used - 1.0));
  if (active == user_count) {
    if (user_count == 1) {
      report.priv_per_user = core::ExtendedReal::infinity();
    } else {
      const double others = static_cast<double>(t) * static_cast<double>(n) *
                            static_cast<double>(user_count - 1);
      report.priv_per_user =
          core::ExtendedReal(0.5 * dd * std::log1p(1.0 / others));
    }
  }
  report.psi_minus_slope = 2.0 * std::sqrt(dd) * (1.0 + 1.0 / used) * variance;
  const double slope = report.psi_minus_slope;
  report.psi_minus_inverse = [slope](double u) { return slope * std::sqrt(u); };
  report.psi_plus_inverse = [](double) { return 0.0; };
  return report;
}

}  // namespace fedinfo::bounds
