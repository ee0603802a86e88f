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
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fedinfo::core {

using Vector = std::vector<double>;

// Isotropic Gaussian data distribution N(mean, variance * I_d).
struct GaussianPrior {
  Vector mean;
  double variance = 1.0;
  int dim = 1;

  // Prior whose mean vector is (mean_value, ..., mean_value).
  static GaussianPrior isotropic(int dim, double variance, double mean_value = 0.0);
};

// Throws std::invalid_argument when variance <= 0, dim < 1, or the mean
// length disagrees with dim.
void validate(const GaussianPrior& prior);

// Samples held by one user. owner is the 1-based user index; batch is the
// round the data belongs to, with 0 marking non-federated data.
struct Dataset {
  std::vector<Vector> samples;
  int owner = 1;
  int batch = 0;
};

struct Hypothesis {
  Vector value;
};

// Deterministic labeled random stream. Identical (seed, label) pairs yield
// identical draws; independent streams are derived by extending the label,
// never by sharing a generator. The raw 64-bit stream is a mersenne twister
// keyed by a mix of the seed and a hash of the label, and all real-valued
// draws go through fixed, documented transforms (Box-Muller for normals) so
// sequences are reproducible run to run.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string label);

  // Child stream labeled "<label>/<child>", starting from the same seed.
  SeededRng derive(std::string_view child) const;

  std::uint64_t next_u64();

  // Uniform on (0, 1]; never returns 0, so log(uniform01()) is finite.
  double uniform01();

  // Standard normal draw (Box-Muller, with the paired draw cached).
  double normal();

  // Unbiased uniform integer in [0, bound); throws when bound is 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

 private:
  std::uint64_t seed_ = 0;
  std::string label_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// count i.i.d. draws from the prior; throws on count < 1.
Dataset sample_dataset(const GaussianPrior& prior, int count, SeededRng& rng);

// Squared Euclidean distance between a sample and a hypothesis.
double squared_loss(const Vector& sample, const Hypothesis& w);

// Mean squared loss over the dataset; throws on an empty dataset.
double empirical_risk(const Dataset& data, const Hypothesis& w);

// Exact expectation of the squared loss under the prior:
// dim * variance + squared distance from the prior mean.
double population_risk_gaussian(const GaussianPrior& prior, const Hypothesis& w);

// A nonnegative quantity that may be exactly +infinity (single-user privacy
// leakage). Keeps the infinite state out of ordinary double arithmetic.
class ExtendedReal {
 public:
  ExtendedReal() = default;
  ExtendedReal(double value) : value_(value) {}  // NOLINT: implicit by design

  static ExtendedReal infinity();

  bool is_infinite() const { return infinite_; }

  // Finite value; throws std::logic_error when infinite.
  double value() const;

  // "%.17g" rendering of the value, or the literal "inf".
  std::string to_string() const;

 private:
  bool infinite_ = false;
  double value_ = 0.0;
};

// Shortest-fixed 17-significant-digit rendering used for all machine output.
std::string format_real17(double value);

}  // namespace fedinfo::core
