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

#include "relkd/reliability.hpp"

#include <algorithm>
#include <cmath>

namespace relkd {

void ReliabilityConfig::validate() const {
  if (!(gate_steepness > 0.0)) throw DomainError("reliability: gate steepness k must be > 0");
  if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0)) {
    throw DomainError("reliability: gate threshold delta must lie in [0, 1]");
  }
  if (!(weight_temperature > 0.0)) throw DomainError("reliability: weight temperature must be > 0");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double confidence(const ProbDist& p) {
  const double c = 1.0 - entropy(p) / std::log(static_cast<double>(p.size()));
  return std::clamp(c, 0.0, 1.0);
}

std::pair<double, double> confidence_weights(double c1, double c2, const ReliabilityConfig& cfg) {
  const double w1 = sigmoid((c1 - c2) / cfg.weight_temperature);
  return {w1, 1.0 - w1};
}

double agreement(const ProbDist& p1, const ProbDist& p2) {
  return std::clamp(1.0 - jsd(p1, p2) / std::log(2.0), 0.0, 1.0);
}

double gate(double a, const ReliabilityConfig& cfg) {
  return sigmoid(cfg.gate_steepness * (a - cfg.gate_threshold));
}

TokenReliability token_reliability(const ProbDist& p1, const ProbDist& p2, const ReliabilityConfig& cfg) {
  require_same_size(p1.size(), p2.size(), "token_reliability");
  TokenReliability r;
  r.c1 = confidence(p1);
  r.c2 = confidence(p2);
  std::tie(r.w1, r.w2) = confidence_weights(r.c1, r.c2, cfg);
  r.agreement = agreement(p1, p2);
  r.lambda = gate(r.agreement, cfg);
  return r;
}

}  // namespace relkd
