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

#pragma once

#include <utility>

#include "relkd/distmath.hpp"

namespace relkd {

// Constants of the two-teacher agreement gate. Defaults are the published
// values: steepness 5, threshold 0.5, confidence-softmax temperature 1.
struct ReliabilityConfig {
  double gate_steepness = 5.0;
  double gate_threshold = 0.5;
  double weight_temperature = 1.0;

  void validate() const;
};

// Per-token reliability of a teacher pair.
struct TokenReliability {
  double c1 = 0.0;
  double c2 = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;
  double agreement = 1.0;
  double lambda = 0.5;
};

// 1 - H(p) / ln|V|. |V| is the full vocabulary size of p even when p was
// densified from a truncated cache.
double confidence(const ProbDist& p);

// Two-way softmax of (c1, c2) / tau_w.
std::pair<double, double> confidence_weights(double c1, double c2, const ReliabilityConfig& cfg);

// 1 - JSD(p1, p2) / ln 2.
double agreement(const ProbDist& p1, const ProbDist& p2);

// sigmoid(k * (a - delta)).
double gate(double a, const ReliabilityConfig& cfg);

TokenReliability token_reliability(const ProbDist& p1, const ProbDist& p2, const ReliabilityConfig& cfg);

double sigmoid(double x);

}  // namespace relkd
