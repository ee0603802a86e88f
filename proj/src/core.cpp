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

#include "fedinfo/core.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace fedinfo::core {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

GaussianPrior GaussianPrior::isotropic(int dim, double variance,
                                       double mean_value) {
  GaussianPrior prior;
  prior.mean.assign(static_cast<std::size_t>(dim > 0 ? dim : 0), mean_value);
  prior.variance = variance;
  prior.dim = dim;
  validate(prior);
  return prior;
}

void validate(const GaussianPrior& prior) {
  if (prior.dim < 1) {
    throw std::invalid_argument("GaussianPrior: dim must be >= 1");
  }
  if (!(prior.variance > 0.0) || !std::isfinite(prior.variance)) {
    throw std::invalid_argument("GaussianPrior: variance must be > 0");
  }
  if (prior.mean.size() != static_cast<std::size_t>(prior.dim)) {
    throw std::invalid_argument("GaussianPrior: mean length must equal dim");
  }
}

SeededRng::SeededRng(std::uint64_t seed, std::string label)
    : seed_(seed),
      label_(std::move(label)),
      engine_(splitmix64(seed ^ splitmix64(fnv1a64(label_)))) {}

SeededRng SeededRng::derive(std::string_view child) const {
  std::string derived = label_;
  derived += '/';
  derived += child;
  return SeededRng(seed_, std::move(derived));
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform01() {
  // 53 uniform mantissa bits shifted into (0, 1]; the +1 keeps 0 out so the
  // Box-Muller logarithm below is always finite.
  const std::uint64_t bits = (next_u64() >> 11) + 1;
  return static_cast<double>(bits) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t SeededRng::uniform_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("SeededRng::uniform_below: bound must be > 0");
  }
  // Rejection below the largest multiple of bound keeps the draw unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % bound;
  }
}

Dataset sample_dataset(const GaussianPrior& prior, int count, SeededRng& rng) {
  validate(prior);
  if (count < 1) {
    throw std::invalid_argument("sample_dataset: count must be >= 1");
  }
  const double scale = std::sqrt(prior.variance);
  Dataset data;
  data.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vector sample(prior.mean);
    for (double& entry : sample) entry += scale * rng.normal();
    data.samples.push_back(std::move(sample));
  }
  return data;
}

double squared_loss(const Vector& sample, const Hypothesis& w) {
  if (sample.size() != w.value.size()) {
    throw std::invalid_argument("squared_loss: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double diff = sample[i] - w.value[i];
    total += diff * diff;
  }
  return total;
}

double empirical_risk(const Dataset& data, const Hypothesis& w) {
  if (data.samples.empty()) {
    throw std::invalid_argument("empirical_risk: dataset is empty");
  }
  double total = 0.0;
  for (const Vector& sample : data.samples) total += squared_loss(sample, w);
  return total / static_cast<double>(data.samples.size());
}

double population_risk_gaussian(const GaussianPrior& prior,
                                const Hypothesis& w) {
  validate(prior);
  if (w.value.size() != static_cast<std::size_t>(prior.dim)) {
    throw std::invalid_argument("population_risk_gaussian: dimension mismatch");
  }
  double bias = 0.0;
  for (std::size_t i = 0; i < w.value.size(); ++i) {
    const double diff = prior.mean[i] - w.value[i];
    bias += diff * diff;
  }
  return static_cast<double>(prior.dim) * prior.variance + bias;
}

ExtendedReal ExtendedReal::infinity() {
  ExtendedReal r;
  r.infinite_ = true;
  r.value_ = std::numeric_limits<double>::infinity();
  return r;
}

double ExtendedReal::value() const {
  if (infinite_) {
    throw std::logic_error("ExtendedReal: no finite value, quantity is +inf");
  }
  return value_;
}

std::string ExtendedReal::to_string() const {
  if (infinite_) return "inf";
  return format_real17(value_);
}

std::string format_real17(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace fedinfo::core
