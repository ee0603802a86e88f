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

#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fedinfo/bounds.hpp"

using namespace fedinfo;

TEST_SUITE("bounds") {

TEST_CASE("quadratic envelope dual inverse matches sqrt(2 R^2 u)") {
  for (double r : {0.5, 1.0, 3.0}) {
    const bounds::PsiEnvelope envelope = bounds::subgaussian_envelope(r);
    for (double u : {0.01, 0.1, 1.0, 10.0}) {
      const double numeric = bounds::legendre_dual_inverse(envelope, u);
      const double analytic = std::sqrt(2.0 * r * r * u);
      CHECK(std::abs(numeric - analytic) <= 1e-9 * std::max(1.0, analytic));
    }
  }
}

TEST_CASE("dual inverse of a bounded-domain envelope matches sqrt(2u) + u") {
  // psi(lambda) = lambda^2 / (2 (1 - lambda)) on (0, 1) has the known
  // conjugate inverse sqrt(2u) + u.
  bounds::PsiEnvelope envelope;
  envelope.psi = [](double lambda) {
    return lambda * lambda / (2.0 * (1.0 - lambda));
  };
  envelope.domain_bound = 1.0;
  for (double u : {1e-4, 0.01, 0.5, 2.0, 25.0}) {
    const double numeric = bounds::legendre_dual_inverse(envelope, u);
    const double analytic = std::sqrt(2.0 * u) + u;
    CHECK(std::abs(numeric - analytic) <= 1e-8 * analytic);
  }
}

TEST_CASE("dual inverse is zero at u = 0 and for the zero envelope") {
  CHECK(bounds::legendre_dual_inverse(bounds::subgaussian_envelope(2.0), 0.0) ==
        0.0);
  const bounds::PsiEnvelope zero = bounds::zero_envelope();
  CHECK(zero.dual_inverse_is_zero);
  CHECK(bounds::legendre_dual_inverse(zero, 3.7) == 0.0);
  CHECK_THROWS_AS(
      (void)bounds::legendre_dual_inverse(bounds::subgaussian_envelope(1.0),
                                          -0.1),
      std::invalid_argument);
}

TEST_CASE("envelope_for_sqrt_dual produces the requested dual slope") {
  for (double slope : {0.1, 1.0, 4.9}) {
    const bounds::PsiEnvelope envelope =
        bounds::envelope_for_sqrt_dual(slope);
    for (double u : {0.05, 1.0, 7.0}) {
      const double numeric = bounds::legendre_dual_inverse(envelope, u);
      CHECK(std::abs(numeric - slope * std::sqrt(u)) <=
            1e-9 * std::max(1.0, slope * std::sqrt(u)));
    }
  }
}

TEST_CASE("invalid envelopes are rejected") {
  bounds::PsiEnvelope concave;
  concave.psi = [](double lambda) { return std::sqrt(lambda); };
  concave.domain_bound = 4.0;
  CHECK_THROWS_AS((void)bounds::legendre_dual_inverse(concave, 1.0),
                  std::invalid_argument);

  bounds::PsiEnvelope shifted;
  shifted.psi = [](double lambda) { return lambda + 1.0; };
  shifted.domain_bound = 4.0;
  CHECK_THROWS_AS((void)bounds::legendre_dual_inverse(shifted, 1.0),
                  std::invalid_argument);
}

TEST_CASE("centralized closed forms at n=10 d=5 unit variance") {
  const bounds::ClosedFormReport report =
      bounds::centralized_closed_forms(10, 5, 1.0);
  CHECK(report.gen == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(report.mi_per_sample - 0.26340128914456573) < 1e-15);
  REQUIRE(report.priv_per_user.has_value());
  CHECK(report.priv_per_user->is_infinite());
  // Slope 2 sigma^2 sqrt(d) (1 + 1/n) and the resulting upper bound.
  CHECK(report.psi_minus_slope ==
        doctest::Approx(2.0 * std::sqrt(5.0) * 1.1).epsilon(1e-15));
  CHECK(std::abs(report.psi_minus_inverse(report.mi_per_sample) -
                 2.5247398276453139) < 1e-12);
  CHECK(report.psi_plus_inverse(report.mi_per_sample) == 0.0);
  CHECK_THROWS_WITH_AS((void)bounds::centralized_closed_forms(1, 1, 1.0),
                       doctest::Contains("n >= 2"), std::invalid_argument);
}

TEST_CASE("distributed closed forms on an asymmetric three-user config") {
  const std::vector<int> sizes = {2, 3, 5};
  const std::vector<double> variances = {0.5, 1.0, 2.0};
  const std::vector<bounds::ClosedFormReport> reports =
      bounds::distributed_closed_forms(sizes, variances, 2);
  REQUIRE(reports.size() == 3);
  // V = sum n_i sigma_i^2 = 14, n = 10: gen = 2 d V / n^2 = 0.56.
  CHECK(reports[0].gen == doctest::Approx(0.56).epsilon(1e-15));
  CHECK(std::abs(reports[0].mi_per_sample - std::log1p(0.5 / 13.5)) < 1e-15);
  CHECK(std::abs(reports[2].mi_per_sample - std::log1p(2.0 / 12.0)) < 1e-15);
  REQUIRE(reports[2].priv_per_user.has_value());
  CHECK(std::abs(reports[2].priv_per_user->value() - std::log1p(0.5)) <
        1e-15);
  // Per-user slope 2 sqrt(d) (V / n^2 + sigma_k^2).
  CHECK(reports[1].psi_minus_slope ==
        doctest::Approx(2.0 * std::sqrt(2.0) * (0.14 + 1.0)).epsilon(1e-15));
}

TEST_CASE("single-user distributed leakage is unbounded") {
  const std::vector<bounds::ClosedFormReport> reports =
      bounds::distributed_closed_forms({4}, {1.0}, 1);
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].priv_per_user.has_value());
  CHECK(reports[0].priv_per_user->is_infinite());
}

TEST_CASE("distributed closed forms reject a single one-sample user") {
  // V = sigma^2 leaves no residual variance given the target sample.
  CHECK_THROWS_WITH_AS((void)bounds::distributed_closed_forms({1}, {2.0}, 1),
                       doctest::Contains("sigma"), std::invalid_argument);
}

TEST_CASE("federated closed forms track rounds and participation") {
  const bounds::ClosedFormReport report =
      bounds::federated_closed_forms(2, 4, 10, 10, 1.0, 1);
  CHECK(report.gen == doctest::Approx(2.0 / (2.0 * 4.0 * 10.0)).epsilon(1e-15));
  REQUIRE(report.gen_active_users.has_value());
  CHECK(*report.gen_active_users == report.gen);
  CHECK(std::abs(report.mi_per_sample - 0.0062893911034300927) < 1e-15);
  REQUIRE(report.priv_per_user.has_value());
  CHECK(std::abs(report.priv_per_user->value() -
                 0.5 * std::log1p(1.0 / (2.0 * 4.0 * 9.0))) < 1e-15);

  // Partial participation: leakage has no closed form, gen splits in two.
  const bounds::ClosedFormReport partial =
      bounds::federated_closed_forms(2, 4, 10, 4, 1.0, 1);
  CHECK_FALSE(partial.priv_per_user.has_value());
  CHECK(partial.gen == doctest::Approx(2.0 / (2.0 * 4.0 * 10.0)));
  CHECK(*partial.gen_active_users == doctest::Approx(2.0 / (2.0 * 4.0 * 4.0)));
  CHECK(std::abs(partial.mi_per_sample - 0.5 * std::log1p(1.0 / 31.0)) <
        1e-15);

  // Single user, full participation: unbounded leakage.
  const bounds::ClosedFormReport solo =
      bounds::federated_closed_forms(1, 4, 1, 1, 1.0, 1);
  REQUIRE(solo.priv_per_user.has_value());
  CHECK(solo.priv_per_user->is_infinite());

  CHECK_THROWS_WITH_AS((void)bounds::federated_closed_forms(1, 1, 3, 1, 1.0, 1),
                       doctest::Contains(">= 2"), std::invalid_argument);
}

TEST_CASE("federated mutual information decays with the round count") {
  const std::vector<double> expected = {0.0062893911034300927,
                                        0.0041841248352582896,
                                        0.0031348065067976975,
                                        0.0025062709117720967};
  for (int t = 2; t <= 5; ++t) {
    const bounds::ClosedFormReport report =
        bounds::federated_closed_forms(t, 4, 10, 10, 1.0, 1);
    CHECK(std::abs(report.mi_per_sample -
                   expected[static_cast<std::size_t>(t - 2)]) < 1e-15);
  }
}

TEST_CASE("bound reports sandwich the analytic risk gap") {
  const bounds::ClosedFormReport closed =
      bounds::centralized_closed_forms(8, 3, 1.0);
  const bounds::BoundReport report = bounds::gen_bounds_centralized(
      std::vector<double>(8, closed.mi_per_sample), bounds::zero_envelope(),
      bounds::envelope_for_sqrt_dual(closed.psi_minus_slope));
  CHECK(report.lower == 0.0);
  CHECK(report.lower <= closed.gen);
  CHECK(closed.gen <= report.upper);
  CHECK(report.upper ==
        doctest::Approx(closed.psi_minus_slope *
                        std::sqrt(closed.mi_per_sample)));
}

TEST_CASE("distributed bound matches the hand-computed dual sum") {
  const std::vector<std::vector<double>> mi = {{0.04, 0.04}, {0.09}};
  const std::vector<bounds::EnvelopePair> envelopes = {
      {bounds::zero_envelope(), bounds::envelope_for_sqrt_dual(2.0)},
      {bounds::zero_envelope(), bounds::envelope_for_sqrt_dual(1.0)}};
  const bounds::BoundReport report =
      bounds::gen_bounds_distributed(mi, {2, 1}, envelopes);
  // (2 * 2 * 0.2 + 1 * 0.3) / 3.
  CHECK(report.upper == doctest::Approx((0.8 + 0.3) / 3.0).epsilon(1e-12));
  CHECK(report.lower == 0.0);
  CHECK_THROWS_AS(
      (void)bounds::gen_bounds_distributed(mi, {2, 2}, envelopes),
      std::invalid_argument);
}

TEST_CASE("federated bound uses only the round's active users") {
  paradigms::ParticipationLog participation;
  participation.active_sets = {{1, 3}};
  std::map<int, std::vector<double>> mi;
  mi[1] = {0.04};
  mi[3] = {0.01, 0.01};
  const std::vector<bounds::EnvelopePair> envelopes(
      3, {bounds::zero_envelope(), bounds::envelope_for_sqrt_dual(1.0)});
  const bounds::BoundReport report =
      bounds::gen_bounds_federated(mi, participation, 1, envelopes);
  CHECK(report.upper == doctest::Approx((0.2 + 0.2) / 3.0).epsilon(1e-12));
  mi.erase(3);
  CHECK_THROWS_AS(
      (void)bounds::gen_bounds_federated(mi, participation, 1, envelopes),
      std::invalid_argument);
}

TEST_CASE("average_bound_reports averages componentwise") {
  bounds::BoundReport a;
  a.lower = 0.0;
  a.upper = 1.0;
  a.analytic_gen = 0.5;
  bounds::BoundReport b;
  b.lower = -0.2;
  b.upper = 3.0;
  b.analytic_gen = 0.7;
  const bounds::BoundReport mean = bounds::average_bound_reports({a, b});
  CHECK(mean.lower == doctest::Approx(-0.1));
  CHECK(mean.upper == doctest::Approx(2.0));
  REQUIRE(mean.analytic_gen.has_value());
  CHECK(*mean.analytic_gen == doctest::Approx(0.6));
}

}  // TEST_SUITE
