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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relkd/distmath.hpp"
#include "relkd/reliability.hpp"

namespace relkd {

// Mixing weights of the standard objective plus the CPDP weight and clamp.
// The hard-label weight is derived so the three alphas always sum to one.
class LossWeights {
 public:
  LossWeights() = default;
  LossWeights(double alpha_kd, double alpha_inter, double mu = 0.05, double cpdp_clamp = 100.0);

  double alpha_hard() const { return 1.0 - alpha_kd_ - alpha_inter_; }
  double alpha_kd() const { return alpha_kd_; }
  double alpha_inter() const { return alpha_inter_; }
  double mu() const { return mu_; }
  double cpdp_clamp() const { return cpdp_clamp_; }

 private:
  double alpha_kd_ = 0.01;
  double alpha_inter_ = 0.0;
  double mu_ = 0.05;
  double cpdp_clamp_ = 100.0;
};

using Mask = std::vector<bool>;
Mask full_mask(std::size_t length);

// Teacher-forced logits for one target sequence. Teacher tracks are optional;
// the losses that need them fail loudly when they are missing.
struct TokenBatch {
  std::vector<int> gold_ids;
  Mask mask;
  std::vector<Logits> student_logits;
  std::optional<std::vector<Logits>> teacher1_logits;
  std::optional<std::vector<Logits>> teacher2_logits;

  std::size_t length() const { return gold_ids.size(); }
  std::size_t vocab_size() const { return student_logits.empty() ? 0 : student_logits.front().size(); }
  std::size_t masked_count() const;
  // Checks shapes, gold ids and that at least one position is unmasked.
  void validate() const;
};

// Per-position hidden states and the learned student-to-teacher projection.
// The projection has shape d_T x d_S and maps a student state into teacher space.
struct HiddenPair {
  std::vector<Eigen::VectorXd> student;
  std::vector<Eigen::VectorXd> teacher;
  Eigen::MatrixXd projection;
};

struct AdaptiveTauConfig {
  double tau_min = 0.5;
  double tau_max = 2.0;

  void validate() const;
};

// Inter-teacher divergence anchor; computed once before training.
class CpdpAnchor {
 public:
  explicit CpdpAnchor(double delta_star);
  double delta_star() const { return delta_star_; }

 private:
  double delta_star_;
};

// Loss value and its gradient with respect to the student logits.
struct LossGrad {
  double value = 0.0;
  std::vector<Logits> grad;
};

struct InterResult {
  double value = 0.0;
  std::vector<Eigen::VectorXd> grad_student;
  Eigen::MatrixXd grad_projection;
};

struct StandardResult {
  double value = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double inter = 0.0;
  std::vector<Logits> grad_logits;
  std::vector<Eigen::VectorXd> grad_hidden;  // empty unless the inter term is active
  Eigen::MatrixXd grad_projection;
};

// Overrides of the EWAD gate and teacher weights. The ablation arms pin one or
// both of them; unset fields use the computed reliability.
struct EwadRouting {
  std::optional<double> fixed_lambda;
  std::optional<double> fixed_w1;
};

enum class EwadVariant { Full, FixedWeights, ConfidenceOnly, AgreementOnly };
EwadRouting routing_for(EwadVariant variant);

struct EwadTokenTrace {
  std::size_t position = 0;
  TokenReliability reliability;  // lambda and weights as actually applied
  double kd = 0.0;               // w1 KL(T1||S) + w2 KL(T2||S) at the KD temperature
  double ce = 0.0;
  double cpdp = 0.0;             // filled by combined_total only
};

struct EwadResult {
  double value = 0.0;
  std::vector<Logits> grad;
  std::vector<EwadTokenTrace> trace;
};

struct CpdpResult {
  double value = 0.0;
  std::vector<Logits> grad;
  std::vector<double> per_token;               // post-clamp value at each masked position
  std::vector<std::size_t> positions;           // positions matching per_token
  std::vector<std::size_t> entropy_floored;     // positions where H(p_S) hit the floor
};

struct CombinedResult {
  double value = 0.0;
  double ewad = 0.0;
  double cpdp = 0.0;
  std::vector<Logits> grad;
  std::vector<EwadTokenTrace> trace;
  std::vector<std::size_t> entropy_floored;
};

inline constexpr double kEntropyFloor = 1e-8;

LossGrad ce_loss(const TokenBatch& batch);
LossGrad kd_loss(const TokenBatch& batch, Temperature tau);
InterResult inter_match_loss(const HiddenPair& hidden, const Mask& mask);
StandardResult standard_total(const TokenBatch& batch, const HiddenPair* hidden, const LossWeights& weights,
                              Temperature tau);

EwadResult ewad_loss(const TokenBatch& batch, const ReliabilityConfig& rcfg, Temperature tau,
                     const EwadRouting& routing = {});

// The student entropy in the denominator is treated as a constant by the
// gradient; per-token values are clamped at weights.cpdp_clamp().
CpdpResult cpdp_loss(const TokenBatch& batch, const CpdpAnchor& anchor, const LossWeights& weights);

CpdpAnchor compute_anchor(std::span<const ProbDist> teacher1, std::span<const ProbDist> teacher2);

CombinedResult combined_total(const TokenBatch& batch, const ReliabilityConfig& rcfg, const CpdpAnchor& anchor,
                              const LossWeights& weights, Temperature tau, const EwadRouting& routing = {});

// Masked mean entropy of a teacher's per-position distributions.
double mean_masked_entropy(std::span<const ProbDist> teacher, const Mask& mask);

Temperature adaptive_tau(std::span<const ProbDist> teacher, const Mask& mask, double batch_mean_entropy,
                         const AdaptiveTauConfig& cfg);

}  // namespace relkd
