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

#include "relkd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relkd {

namespace {

std::vector<Logits> zeros_like(const std::vector<Logits>& logits) {
  std::vector<Logits> out;
  out.reserve(logits.size());
  for (const auto& row : logits) out.emplace_back(row.size(), 0.0);
  return out;
}

const std::vector<Logits>& require_teacher(const std::optional<std::vector<Logits>>& track, const char* what) {
  if (!track) throw DomainError(std::string(what) + ": teacher logits are missing");
  return *track;
}

double ce_term(const ProbDist& p, int gold) {
  return -std::log(std::max(p[static_cast<std::size_t>(gold)], kKlFloor));
}

}  // namespace

LossWeights::LossWeights(double alpha_kd, double alpha_inter, double mu, double cpdp_clamp)
    : alpha_kd_(alpha_kd), alpha_inter_(alpha_inter), mu_(mu), cpdp_clamp_(cpdp_clamp) {
  if (!(alpha_kd >= 0.0 && alpha_kd <= 1.0) || !(alpha_inter >= 0.0 && alpha_inter <= 1.0)) {
    throw DomainError("LossWeights: alphas must lie in [0, 1]");
  }
  if (alpha_kd + alpha_inter > 1.0) throw DomainError("LossWeights: alpha_kd + alpha_inter exceeds 1");
  if (!(mu >= 0.0)) throw DomainError("LossWeights: mu must be >= 0");
  if (!(cpdp_clamp > 0.0)) throw DomainError("LossWeights: CPDP clamp must be > 0");
}

Mask full_mask(std::size_t length) { return Mask(length, true); }

std::size_t TokenBatch::masked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void TokenBatch::validate() const {
  const std::size_t t = length();
  if (t == 0) throw DomainError("TokenBatch: empty sequence");
  require_same_size(mask.size(), t, "TokenBatch mask");
  require_same_size(student_logits.size(), t, "TokenBatch student logits");
  const std::size_t v = vocab_size();
  for (const auto& row : student_logits) require_same_size(row.size(), v, "TokenBatch student logits");
  for (const auto* track : {&teacher1_logits, &teacher2_logits}) {
    if (!*track) continue;
    require_same_size((*track)->size(), t, "TokenBatch teacher logits");
    for (const auto& row : **track) require_same_size(row.size(), v, "TokenBatch teacher logits");
  }
  for (int id : gold_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) throw DomainError("TokenBatch: gold id out of vocabulary");
  }
  if (masked_count() == 0) throw DomainError("TokenBatch: mask selects no positions");
}

void AdaptiveTauConfig::validate() const {
  if (!(tau_min > 0.0 && tau_min < tau_max)) throw DomainError("AdaptiveTauConfig: need 0 < tau_min < tau_max");
}

CpdpAnchor::CpdpAnchor(double delta_star) : delta_star_(delta_star) {
  if (!std::isfinite(delta_star)) throw DomainError("CpdpAnchor: delta* must be finite");
}

EwadRouting routing_for(EwadVariant variant) {
  switch (variant) {
    case EwadVariant::Full:
      return {};
    case EwadVariant::FixedWeights:
      return {1.0, 0.5};
    case EwadVariant::ConfidenceOnly:
      return {1.0, std::nullopt};
    case EwadVariant::AgreementOnly:
      return {std::nullopt, 0.5};
  }
  return {};
}

LossGrad ce_loss(const TokenBatch& batch) {
  batch.validate();
  const double inv_m = 1.0 / static_cast<double>(batch.masked_count());
  LossGrad out{0.0, zeros_like(batch.student_logits)};
  for (std::size_t t = 0; t < batch.length(); ++t) {
    if (!batch.mask[t]) continue;
    const ProbDist p = softmax_t(batch.student_logits[t], Temperature(1.0));
    out.value += ce_term(p, batch.gold_ids[t]) * inv_m;
    for (std::size_t v = 0; v < p.size(); ++v) out.grad[t][v] = p[v] * inv_m;
    out.grad[t][static_cast<std::size_t>(batch.gold_ids[t])] -= inv_m;
  }
  return out;
}

LossGrad kd_loss(const TokenBatch& batch, Temperature tau) {
  batch.validate();
  const auto& teacher = require_teacher(batch.teacher1_logits, "kd_loss");
  const double t = tau.value();
  const double inv_m = 1.0 / static_cast<double>(batch.masked_count());
  LossGrad out{0.0, zeros_like(batch.student_logits)};
  for (std::size_t pos = 0; pos < batch.length(); ++pos) {
    if (!batch.mask[pos]) continue;
    const ProbDist pt = softmax_t(teacher[pos], tau);
    const ProbDist ps = softmax_t(batch.student_logits[pos], tau);
    out.value += t * t * kl(pt, ps) * inv_m;
    // d/dz_S of tau^2 KL(p_T || softmax(z_S / tau)) = tau (p_S - p_T)
    for (std::size_t v = 0; v < ps.size(); ++v) out.grad[pos][v] = t * (ps[v] - pt[v]) * inv_m;
  }
  return out;
}

InterResult inter_match_loss(const HiddenPair& hidden, const Mask& mask) {
  const std::size_t t = hidden.student.size();
  require_same_size(hidden.teacher.size(), t, "inter_match_loss positions");
  require_same_size(mask.size(), t, "inter_match_loss mask");
  const auto& w = hidden.projection;
  const auto m = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (m == 0) throw DomainError("inter_match_loss: mask selects no positions");
  const double inv_m = 1.0 / static_cast<double>(m);

  InterResult out;
  out.grad_projection = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  out.grad_student.reserve(t);
  for (std::size_t pos = 0; pos < t; ++pos) {
    const auto& hs = hidden.student[pos];
    const auto& ht = hidden.teacher[pos];
    require_same_size(static_cast<std::size_t>(hs.size()), static_cast<std::size_t>(w.cols()),
                      "inter_match_loss student dim");
    require_same_size(static_cast<std::size_t>(ht.size()), static_cast<std::size_t>(w.rows()),
                      "inter_match_loss teacher dim");
    out.grad_student.push_back(Eigen::VectorXd::Zero(hs.size()));
    if (!mask[pos]) continue;

    const Eigen::VectorXd u = w * hs;
    const double nu = u.norm();
    const double nt = ht.norm();
    if (nu == 0.0 || nt == 0.0) {
      throw DomainError("inter_match_loss: zero-norm hidden vector at position " + std::to_string(pos));
    }
    const Eigen::VectorXd uh = u / nu;
    const Eigen::VectorXd vh = ht / nt;
    out.value += (uh - vh).squaredNorm() * inv_m;

    // ||u^ - v^||^2 = 2 - 2 u^.v^, so dL/du = 2 ((u^.v^) u^ - v^) / ||u||.
    const Eigen::VectorXd du = (2.0 * inv_m / nu) * (uh.dot(vh) * uh - vh);
    out.grad_projection.noalias() += du * hs.transpose();
    out.grad_student[pos].noalias() = w.transpose() * du;
  }
  return out;
}

StandardResult standard_total(const TokenBatch& batch, const HiddenPair* hidden, const LossWeights& weights,
                              Temperature tau) {
  StandardResult out;
  LossGrad ce = ce_loss(batch);
  out.ce = ce.value;
  out.value = weights.alpha_hard() * ce.value;
  out.grad_logits = std::move(ce.grad);
  for (auto& row : out.grad_logits) {
    for (double& g : row) g *= weights.alpha_hard();
  }

  if (weights.alpha_kd() > 0.0) {
    const LossGrad kd = kd_loss(batch, tau);
    out.kd = kd.value;
    out.value += weights.alpha_kd() * kd.value;
    for (std::size_t t = 0; t < out.grad_logits.size(); ++t) {
      for (std::size_t v = 0; v < out.grad_logits[t].size(); ++v) {
        out.grad_logits[t][v] += weights.alpha_kd() * kd.grad[t][v];
      }
    }
  }

  if (weights.alpha_inter() > 0.0) {
    if (hidden == nullptr) throw DomainError("standard_total: inter-match term active but hidden states missing");
    require_same_size(hidden->student.size(), batch.length(), "standard_total hidden positions");
    InterResult inter = inter_match_loss(*hidden, batch.mask);
    out.inter = inter.value;
    out.value += weights.alpha_inter() * inter.value;
    out.grad_hidden = std::move(inter.grad_student);
    for (auto& g : out.grad_hidden) g *= weights.alpha_inter();
    out.grad_projection = weights.alpha_inter() * inter.grad_projection;
  }
  return out;
}

EwadResult ewad_loss(const TokenBatch& batch, const ReliabilityConfig& rcfg, Temperature tau,
                     const EwadRouting& routing) {
  batch.validate();
  rcfg.validate();
  const auto& t1 = require_teacher(batch.teacher1_logits, "ewad_loss");
  const auto& t2 = require_teacher(batch.teacher2_logits, "ewad_loss (second teacher)");
  const double t = tau.value();
  const double inv_m = 1.0 / static_cast<double>(batch.masked_count());
  const Temperature unit(1.0);

  EwadResult out{0.0, zeros_like(batch.student_logits), {}};
  for (std::size_t pos = 0; pos < batch.length(); ++pos) {
    if (!batch.mask[pos]) continue;
    // Reliability uses the raw teacher distributions; only the KD terms are softened.
    TokenReliability rel = token_reliability(softmax_t(t1[pos], unit), softmax_t(t2[pos], unit), rcfg);
    if (routing.fixed_w1) {
      rel.w1 = *routing.fixed_w1;
      rel.w2 = 1.0 - rel.w1;
    }
    if (routing.fixed_lambda) rel.lambda = *routing.fixed_lambda;

    const ProbDist pt1 = softmax_t(t1[pos], tau);
    const ProbDist pt2 = softmax_t(t2[pos], tau);
    const ProbDist ps_tau = softmax_t(batch.student_logits[pos], tau);
    const ProbDist ps = softmax_t(batch.student_logits[pos], unit);
    const auto gold = static_cast<std::size_t>(batch.gold_ids[pos]);

    const double kd = rel.w1 * kl(pt1, ps_tau) + rel.w2 * kl(pt2, ps_tau);
    const double ce = ce_term(ps, batch.gold_ids[pos]);
    out.value += (rel.lambda * kd + (1.0 - rel.lambda) * ce) * inv_m;

    auto& g = out.grad[pos];
    for (std::size_t v = 0; v < g.size(); ++v) {
      // d KL(p_T || softmax(z/tau)) / dz = (p_S,tau - p_T) / tau; weights sum to one.
      const double dkd = (ps_tau[v] - rel.w1 * pt1[v] - rel.w2 * pt2[v]) / t;
      const double dce = ps[v] - (v == gold ? 1.0 : 0.0);
      g[v] = (rel.lambda * dkd + (1.0 - rel.lambda) * dce) * inv_m;
    }
    out.trace.push_back({pos, rel, kd, ce, 0.0});
  }
  return out;
}

CpdpResult cpdp_loss(const TokenBatch& batch, const CpdpAnchor& anchor, const LossWeights& weights) {
  batch.validate();
  const auto& t1 = require_teacher(batch.teacher1_logits, "cpdp_loss");
  const auto& t2 = require_teacher(batch.teacher2_logits, "cpdp_loss (second teacher)");
  const double inv_m = 1.0 / static_cast<double>(batch.masked_count());
  const Temperature unit(1.0);

  CpdpResult out;
  out.grad = zeros_like(batch.student_logits);
  for (std::size_t pos = 0; pos < batch.length(); ++pos) {
    if (!batch.mask[pos]) continue;
    const ProbDist pt1 = softmax_t(t1[pos], unit);
    const ProbDist pt2 = softmax_t(t2[pos], unit);
    const ProbDist ps = softmax_t(batch.student_logits[pos], unit);

    double h = entropy(ps);
    if (h < kEntropyFloor) {
      h = kEntropyFloor;
      out.entropy_floored.push_back(pos);
    }
    const double residual = (kl(pt1, ps) - kl(pt2, ps)) / h - anchor.delta_star();
    const double raw = residual * residual;
    const bool clamped = raw > weights.cpdp_clamp();
    const double value = clamped ? weights.cpdp_clamp() : raw;
    out.value += value * inv_m;
    out.per_token.push_back(value);
    out.positions.push_back(pos);
    if (clamped) continue;

    // d(KL1 - KL2)/dz_S = (p_S - p_T1) - (p_S - p_T2) = p_T2 - p_T1; H is held constant.
    const double scale = 2.0 * residual / h * inv_m;
    for (std::size_t v = 0; v < ps.size(); ++v) out.grad[pos][v] = scale * (pt2[v] - pt1[v]);
  }
  return out;
}

CpdpAnchor compute_anchor(std::span<const ProbDist> teacher1, std::span<const ProbDist> teacher2) {
  require_same_size(teacher1.size(), teacher2.size(), "compute_anchor");
  if (teacher1.empty()) throw DomainError("compute_anchor: empty calibration set");
  double sum = 0.0;
  for (std::size_t i = 0; i < teacher1.size(); ++i) sum += kl(teacher1[i], teacher2[i]);
  return CpdpAnchor(sum / static_cast<double>(teacher1.size()));
}

CombinedResult combined_total(const TokenBatch& batch, const ReliabilityConfig& rcfg, const CpdpAnchor& anchor,
                              const LossWeights& weights, Temperature tau, const EwadRouting& routing) {
  EwadResult ewad = ewad_loss(batch, rcfg, tau, routing);
  CombinedResult out;
  out.ewad = ewad.value;
  out.value = ewad.value;
  out.grad = std::move(ewad.grad);
  out.trace = std::move(ewad.trace);
  if (weights.mu() == 0.0) return out;

  const CpdpResult cpdp = cpdp_loss(batch, anchor, weights);
  out.cpdp = cpdp.value;
  out.value += weights.mu() * cpdp.value;
  for (std::size_t t = 0; t < out.grad.size(); ++t) {
    for (std::size_t v = 0; v < out.grad[t].size(); ++v) out.grad[t][v] += weights.mu() * cpdp.grad[t][v];
  }
  // Both traces list the masked positions in increasing order.
  for (std::size_t i = 0; i < out.trace.size(); ++i) out.trace[i].cpdp = cpdp.per_token[i];
  out.entropy_floored = cpdp.entropy_floored;
  return out;
}

double mean_masked_entropy(std::span<const ProbDist> teacher, const Mask& mask) {
  require_same_size(mask.size(), teacher.size(), "mean_masked_entropy");
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t t = 0; t < teacher.size(); ++t) {
    if (!mask[t]) continue;
    sum += entropy(teacher[t]);
    ++m;
  }
  if (m == 0) throw DomainError("mean_masked_entropy: mask selects no positions");
  return sum / static_cast<double>(m);
}

Temperature adaptive_tau(std::span<const ProbDist> teacher, const Mask& mask, double batch_mean_entropy,
                         const AdaptiveTauConfig& cfg) {
  cfg.validate();
  const double h = mean_masked_entropy(teacher, mask);
  return Temperature(cfg.tau_min + (cfg.tau_max - cfg.tau_min) * sigmoid(h - batch_mean_entropy));
}

}  // namespace relkd
