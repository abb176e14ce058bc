// Copyright 2026 The relkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "relkd/distmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relkd {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DomainError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
  }
}

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw DomainError("ProbDist: vocabulary must have at least 2 entries");
  double sum = 0.0;
  for (double v : probs_) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("ProbDist: entries must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw DomainError("ProbDist: entries sum to " + std::to_string(sum) + ", expected 1");
  }
}

ProbDist ProbDist::uniform(std::size_t n) {
  return ProbDist(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProbDist ProbDist::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw DomainError("ProbDist::one_hot: index out of range");
  std::vector<double> v(n, 0.0);
  v[index] = 1.0;
  return ProbDist(std::move(v));
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("Temperature must be positive and finite");
}

ProbDist softmax_t(std::span<const double> logits, Temperature tau) {
  if (logits.size() < 2) throw DomainError("softmax_t: need at least 2 logits");
  for (double z : logits) {
    if (!std::isfinite(z)) throw DomainError("softmax_t: non-finite logit");
  }
  const double inv_tau = 1.0 / tau.value();
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - zmax) * inv_tau);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return ProbDist(std::move(out), ProbDist::Unchecked{});
}

double entropy(const ProbDist& p) {
  double h = 0.0;
  for (double v : p.values()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

double kl(const ProbDist& p, const ProbDist& q) {
  require_same_size(p.size(), q.size(), "kl");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
  }
  // Rounding can leave tiny negative values for p ~= q.
  return std::max(d, 0.0);
}

double jsd(const ProbDist& p, const ProbDist& q) {
  require_same_size(p.size(), q.size(), "jsd");
  // Midpoint entries are >= p_i / 2 wherever p_i > 0, so no floor is needed.
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) a += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) b += q[i] * std::log(q[i] / m);
  }
  return std::clamp(0.5 * a + 0.5 * b, 0.0, std::log(2.0));
}

Logits logits_from_probs(const ProbDist& p) {
  Logits z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) z[i] = p[i] > 0.0 ? std::log(p[i]) : kAbsentLogit;
  return z;
}

}  // namespace relkd
