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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace relkd {

// Raised when an input violates a documented precondition (bad logits,
// mismatched vocabularies, empty masks, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Logits = std::vector<double>;

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kKlFloor = 1e-12;

class Temperature;

// A probability vector over a vocabulary of at least two entries. Construction
// validates non-negativity and normalization; the values are immutable.
class ProbDist {
 public:
  explicit ProbDist(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const { return probs_; }
  const std::vector<double>& vec() const { return probs_; }

  static ProbDist uniform(std::size_t n);
  static ProbDist one_hot(std::size_t n, std::size_t index);

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  struct Unchecked {};
  ProbDist(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}
  friend ProbDist softmax_t(std::span<const double> logits, Temperature tau);

  std::vector<double> probs_;
};

class Temperature {
 public:
  explicit Temperature(double tau);
  double value() const { return tau_; }

 private:
  double tau_;
};

// softmax(z / tau), stabilized by max subtraction.
ProbDist softmax_t(std::span<const double> logits, Temperature tau);

// Shannon entropy in nats, 0 log 0 = 0.
double entropy(const ProbDist& p);

// KL(p || q) in nats with q floored at kKlFloor.
double kl(const ProbDist& p, const ProbDist& q);

// Jensen-Shannon divergence with the midpoint mixture, in [0, ln 2].
double jsd(const ProbDist& p, const ProbDist& q);

// Log-probabilities expressed as finite logits: entries with zero mass map to
// kAbsentLogit, which underflows to exactly zero mass for any tau below ~14.
inline constexpr double kAbsentLogit = -1e4;
Logits logits_from_probs(const ProbDist& p);

void require_same_size(std::size_t a, std::size_t b, const char* what);

}  // namespace relkd
