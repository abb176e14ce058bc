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

#include "relkd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "relkd/evalmetrics.hpp"
#include "relkd/parallel.hpp"

namespace relkd {

namespace {

struct ModeName {
  LossMode mode;
  const char* name;
};
constexpr ModeName kModeNames[] = {{LossMode::CE, "CE"},   {LossMode::A2, "A2"},     {LossMode::A3, "A3"},
                                   {LossMode::A4, "A4"},   {LossMode::A5, "A5"},     {LossMode::Ewad, "EWAD"},
                                   {LossMode::EwadCpdp, "EWAD_CPDP"}};

struct VariantName {
  EwadVariant variant;
  const char* name;
};
constexpr VariantName kVariantNames[] = {{EwadVariant::Full, "full"},
                                         {EwadVariant::FixedWeights, "fixed_weights"},
                                         {EwadVariant::ConfidenceOnly, "confidence_only"},
                                         {EwadVariant::AgreementOnly, "agreement_only"}};

const TopKRecord* find_record(const std::map<std::string, TopKRecord>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

void check_record(const TopKRecord* r, std::size_t positions, const std::string& what) {
  if (r == nullptr) throw DomainError("missing teacher record for " + what);
  if (r->positions.size() != positions) {
    throw DomainError("teacher record for " + what + " has " + std::to_string(r->positions.size()) +
                      " positions, target has " + std::to_string(positions));
  }
}

double mean_of(const std::vector<EwadTokenTrace>& trace, double EwadTokenTrace::*field) {
  if (trace.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trace) s += t.*field;
  return s / static_cast<double>(trace.size());
}

// One step's worth of example inputs before the objective runs.
struct Prepared {
  std::size_t index = 0;
  ExampleInputs inputs;
  bool pseudo = false;
};

}  // namespace

const char* loss_mode_name(LossMode mode) {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& name) {
  for (const auto& m : kModeNames) {
    if (name == m.name) return m.mode;
  }
  if (name == "A1") return LossMode::CE;
  throw DomainError("unknown loss mode '" + name + "'");
}

const char* ewad_variant_name(EwadVariant v) {
  for (const auto& n : kVariantNames) {
    if (n.variant == v) return n.name;
  }
  return "?";
}

EwadVariant parse_ewad_variant(const std::string& name) {
  for (const auto& n : kVariantNames) {
    if (name == n.name) return n.variant;
  }
  throw DomainError("unknown EWAD variant '" + name + "'");
}

LossWeights TrainConfig::effective_weights() const {
  const double kd = mode == LossMode::CE ? 0.0 : weights.alpha_kd();
  const double inter = uses_hidden_matching() ? weights.alpha_inter() : 0.0;
  return LossWeights(kd, inter, weights.mu(), weights.cpdp_clamp());
}

void TrainConfig::validate() const {
  reliability.validate();
  adaptive_tau.validate();
  mixing.validate();
  Temperature{tau};
  if (!(learning_rate > 0.0)) throw DomainError("train: learning rate must be > 0");
  if (!(clip_norm >= 0.0)) throw DomainError("train: clip norm must be >= 0");
  if (batch_size == 0) throw DomainError("train: batch size must be >= 1");
  if (hidden_dim == 0 || teacher_hidden_dim == 0) throw DomainError("train: hidden dimensions must be >= 1");
  if (context_limit == 0) throw DomainError("train: context limit must be >= 1");
  if (!(init_scale >= 0.0)) throw DomainError("train: init scale must be >= 0");
  if (uses_hidden_matching() && !(weights.alpha_inter() > 0.0)) {
    throw DomainError("train: hidden-matching stage needs alpha_inter > 0");
  }
  if (mode == LossMode::EwadCpdp && calibration_tokens == 0) {
    throw DomainError("train: CPDP needs at least one calibration token");
  }
}

std::string pseudo_record_key(const std::string& example_id, const std::string& teacher_id) {
  return example_id + "@" + teacher_id;
}

void TeacherSupervision::add_teacher1(const TopKCache& cache) {
  for (const auto& r : cache.records) teacher1[r.example_id] = r;
}

void TeacherSupervision::add_teacher1_pseudo(const TopKCache& cache) {
  for (const auto& r : cache.records) teacher1_pseudo[r.example_id] = r;
}

void TeacherSupervision::add_teacher2(const TopKCache& cache) {
  for (const auto& r : cache.records) teacher2[r.example_id] = r;
}

void TeacherSupervision::add_pseudo(const PseudoCache& cache) {
  for (const auto& r : cache.records) pseudo[r.example_id].push_back(r);
}

void check_supervision(const TrainConfig& cfg, const TeacherSupervision& sup, const std::vector<Example>& train) {
  for (const auto& ex : train) {
    const std::size_t m = ex.target().size();
    if (cfg.uses_teacher_logits()) check_record(find_record(sup.teacher1, ex.id), m, "teacher 1 / " + ex.id);
    if (cfg.uses_second_teacher()) check_record(find_record(sup.teacher2, ex.id), m, "teacher 2 / " + ex.id);
    if (cfg.uses_pseudo_labels() && cfg.mixing.p_pseudo > 0.0) {
      // Examples without any pseudo-label keep their gold target.
      auto it = sup.pseudo.find(ex.id);
      if (it == sup.pseudo.end()) continue;
      for (const auto& p : it->second) {
        const std::string key = pseudo_record_key(ex.id, p.teacher_id);
        check_record(find_record(sup.teacher1_pseudo, key), p.tokens.size() + 1, "teacher 1 / " + key);
      }
    }
  }
  if (cfg.uses_hidden_matching()) {
    if (!sup.hidden_teacher) throw DomainError("hidden-matching stage needs a teacher model");
    if (sup.hidden_teacher->hidden_dim() != cfg.teacher_hidden_dim) {
      throw DomainError("teacher model hidden size does not match teacher_hidden_dim");
    }
  }
}

std::vector<ProbDist> densified(const TopKRecord& record) {
  std::vector<ProbDist> out;
  out.reserve(record.positions.size());
  for (std::size_t p = 0; p < record.positions.size(); ++p) out.push_back(densify(record, p));
  return out;
}

std::vector<Logits> densified_logits(const TopKRecord& record) {
  std::vector<Logits> out;
  out.reserve(record.positions.size());
  for (std::size_t p = 0; p < record.positions.size(); ++p) out.push_back(logits_from_probs(densify(record, p)));
  return out;
}

Objective example_objective(const ToyModelParams& params, const ExampleInputs& in, const TrainConfig& cfg,
                            const std::optional<CpdpAnchor>& anchor) {
  const ForwardPass pass = forward(params, in.document, in.target);
  const std::size_t m = in.target.size();

  TokenBatch batch{in.target, full_mask(m), pass.logits, std::nullopt, std::nullopt};
  if (cfg.uses_teacher_logits()) {
    check_record(in.teacher1, m, "teacher 1");
    batch.teacher1_logits = densified_logits(*in.teacher1);
  }
  if (cfg.uses_second_teacher()) {
    check_record(in.teacher2, m, "teacher 2");
    batch.teacher2_logits = densified_logits(*in.teacher2);
  }
  const Temperature tau(in.tau);

  Objective obj;
  switch (cfg.mode) {
    case LossMode::CE: {
      const LossGrad r = ce_loss(batch);
      obj.value = obj.ce = r.value;
      obj.grads = backward(params, in.document, pass, r.grad, nullptr);
      break;
    }
    case LossMode::A2:
    case LossMode::A3:
    case LossMode::A4:
    case LossMode::A5: {
      std::optional<HiddenPair> hidden;
      if (cfg.uses_hidden_matching()) {
        if (!params.projection) throw DomainError("hidden-matching stage needs a projection matrix");
        if (!in.teacher_hidden) throw DomainError("hidden-matching stage needs teacher hidden states");
        hidden = HiddenPair{pass.hidden, *in.teacher_hidden, *params.projection};
      }
      const StandardResult r = standard_total(batch, hidden ? &*hidden : nullptr, cfg.effective_weights(), tau);
      obj.value = r.value;
      obj.ce = r.ce;
      obj.kd = r.kd;
      obj.inter = r.inter;
      obj.grads = backward(params, in.document, pass, r.grad_logits, r.grad_hidden.empty() ? nullptr : &r.grad_hidden);
      if (hidden) obj.grads.projection = r.grad_projection;
      break;
    }
    case LossMode::Ewad:
    case LossMode::EwadCpdp: {
      const EwadRouting routing = routing_for(cfg.ewad_variant);
      if (cfg.mode == LossMode::Ewad) {
        EwadResult r = ewad_loss(batch, cfg.reliability, tau, routing);
        obj.value = r.value;
        obj.grads = backward(params, in.document, pass, r.grad, nullptr);
        obj.trace = std::move(r.trace);
      } else {
        if (!anchor) throw DomainError("CPDP objective needs an anchor");
        CombinedResult r = combined_total(batch, cfg.reliability, *anchor, cfg.weights, tau, routing);
        obj.value = r.value;
        obj.cpdp = r.cpdp;
        obj.grads = backward(params, in.document, pass, r.grad, nullptr);
        obj.trace = std::move(r.trace);
      }
      obj.kd = mean_of(obj.trace, &EwadTokenTrace::kd);
      obj.ce = mean_of(obj.trace, &EwadTokenTrace::ce);
      break;
    }
  }
  if (params.projection && !obj.grads.projection) {
    obj.grads.projection = Eigen::MatrixXd::Zero(params.projection->rows(), params.projection->cols());
  }
  return obj;
}

CpdpAnchor calibrate_anchor(const TrainConfig& cfg, const TeacherSupervision& sup, const std::vector<Example>& train) {
  std::vector<ProbDist> t1;
  std::vector<ProbDist> t2;
  for (const auto& ex : train) {
    if (t1.size() >= cfg.calibration_tokens) break;
    const TopKRecord* r1 = find_record(sup.teacher1, ex.id);
    const TopKRecord* r2 = find_record(sup.teacher2, ex.id);
    if (r1 == nullptr || r2 == nullptr) throw DomainError("calibration: missing teacher record for " + ex.id);
    const std::size_t n = std::min(r1->positions.size(), r2->positions.size());
    for (std::size_t p = 0; p < n && t1.size() < cfg.calibration_tokens; ++p) {
      t1.push_back(densify(*r1, p));
      t2.push_back(densify(*r2, p));
    }
  }
  return compute_anchor(t1, t2);
}

ToyModelParams initial_params(const TrainConfig& cfg, std::size_t vocab_size) {
  ToyModelParams p = ToyModelParams::random(vocab_size, cfg.hidden_dim, derive_seed(cfg.seed, "init"), cfg.init_scale);
  if (cfg.uses_hidden_matching()) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "projection"));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    Eigen::MatrixXd w(static_cast<Eigen::Index>(cfg.teacher_hidden_dim), static_cast<Eigen::Index>(cfg.hidden_dim));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    p.projection = std::move(w);
  }
  return p;
}

std::vector<std::vector<int>> generate_all(const ToyModelParams& params, const std::vector<Example>& examples,
                                           const DecodeMode& mode) {
  std::vector<std::vector<int>> out(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) { out[i] = generate(params, examples[i].document, mode); });
  return out;
}

TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const TeacherSupervision& sup) {
  cfg.validate();
  if (corpus.train.empty()) throw DomainError("train: empty training split");
  check_supervision(cfg, sup, corpus.train);
  if (corpus.vocab_size < 2) throw DomainError("train: corpus vocabulary size not set");

  TrainResult result;
  result.params = initial_params(cfg, corpus.vocab_size);
  ToyModelParams& params = result.params;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    if (route(corpus.train[i].document.size(), cfg.context_limit) == Route::Direct) {
      order.push_back(i);
    }
  }
  result.routed_direct = order.size();
  result.routed_mapreduce = corpus.train.size() - order.size();
  if (order.empty()) throw DomainError("train: no training example fits the context limit");

  std::optional<CpdpAnchor> anchor;
  if (cfg.mode == LossMode::EwadCpdp) {
    anchor = calibrate_anchor(cfg, sup, corpus.train);
    result.delta_star = anchor->delta_star();
  }

  std::mt19937_64 order_rng(derive_seed(cfg.seed, "order"));
  double entropy_sum = 0.0;
  std::size_t entropy_count = 0;
  const std::size_t n_val = std::min(cfg.val_examples, corpus.test.size());
  const std::vector<Example> val(corpus.test.begin(), corpus.test.begin() + static_cast<std::ptrdiff_t>(n_val));
  const DecodeMode greedy{1, cfg.max_summary_len};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochMetrics em;
    em.epoch = epoch + 1;
    std::size_t pseudo_count = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      std::vector<Prepared> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = corpus.train[order[k]];
        Prepared prep;
        prep.index = order[k];
        prep.inputs.document = ex.document;
        prep.inputs.tau = cfg.tau;
        prep.inputs.target = ex.target();
        prep.inputs.teacher1 = find_record(sup.teacher1, ex.id);
        prep.inputs.teacher2 = find_record(sup.teacher2, ex.id);
        auto labels_it = sup.pseudo.find(ex.id);
        if (cfg.uses_pseudo_labels() && labels_it != sup.pseudo.end() && !labels_it->second.empty()) {
          const auto& labels = labels_it->second;
          const std::vector<int> gold = ex.target();
          const TargetChoice choice =
              sample_target(gold, labels, cfg.mixing, epoch * corpus.train.size() + order[k]);
          if (choice.pseudo) {
            prep.pseudo = true;
            prep.inputs.target = choice.tokens;
            prep.inputs.target.push_back(kEos);
            prep.inputs.teacher1 = find_record(sup.teacher1_pseudo, pseudo_record_key(ex.id, choice.teacher_id));
          }
        }
        if (cfg.uses_hidden_matching()) {
          prep.inputs.teacher_hidden = forward(*sup.hidden_teacher, ex.document, prep.inputs.target).hidden;
        }
        batch.push_back(std::move(prep));
      }

      if (cfg.uses_adaptive_tau()) {
        std::vector<double> sample_entropy;
        for (const auto& prep : batch) {
          check_record(prep.inputs.teacher1, prep.inputs.target.size(), corpus.train[prep.index].id);
          const auto dists = densified(*prep.inputs.teacher1);
          sample_entropy.push_back(mean_masked_entropy(dists, full_mask(dists.size())));
        }
        const double batch_mean =
            std::accumulate(sample_entropy.begin(), sample_entropy.end(), 0.0) / static_cast<double>(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const auto dists = densified(*batch[i].inputs.teacher1);
          batch[i].inputs.tau = adaptive_tau(dists, full_mask(dists.size()), batch_mean, cfg.adaptive_tau).value();
          entropy_sum += sample_entropy[i];
          ++entropy_count;
        }
      }

      std::vector<Objective> objectives(batch.size());
      parallel_for(batch.size(),
                   [&](std::size_t i) { objectives[i] = example_objective(params, batch[i].inputs, cfg, anchor); });

      ParamGrads grad = ParamGrads::zeros_like(params);
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const Objective& o = objectives[i];
        if (!std::isfinite(o.value)) {
          throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch + 1) + " on " +
                                 corpus.train[batch[i].index].id);
        }
        grad.add_scaled(o.grads, inv_b);
        em.loss += o.value;
        em.ce += o.ce;
        em.kd += o.kd;
        em.inter += o.inter;
        em.cpdp += o.cpdp;
        em.mean_tau += batch[i].inputs.tau;
        if (batch[i].pseudo) ++pseudo_count;
      }
      double step = cfg.learning_rate;
      if (cfg.clip_norm > 0.0) {
        double sq = grad.embedding.squaredNorm() + grad.recurrence.squaredNorm() + grad.output.squaredNorm();
        if (grad.projection) sq += grad.projection->squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) step *= cfg.clip_norm / norm;
      }
      params.embedding -= step * grad.embedding;
      params.recurrence -= step * grad.recurrence;
      params.output -= step * grad.output;
      if (params.projection && grad.projection) *params.projection -= step * *grad.projection;
    }

    const double n = static_cast<double>(order.size());
    em.loss /= n;
    em.ce /= n;
    em.kd /= n;
    em.inter /= n;
    em.cpdp /= n;
    em.mean_tau /= n;
    em.pseudo_fraction = static_cast<double>(pseudo_count) / n;
    if (!params.embedding.allFinite() || !params.recurrence.allFinite() || !params.output.allFinite()) {
      throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch + 1));
    }
    if (!val.empty()) {
      std::vector<std::vector<int>> refs;
      refs.reserve(val.size());
      for (const auto& ex : val) refs.push_back(ex.summary);
      em.val_rougeL = corpus_rouge(generate_all(params, val, greedy), refs).rougeL;
    }
    result.log.push_back(em);
  }
  if (cfg.uses_adaptive_tau() && entropy_count > 0) {
    result.entropy_running_mean = entropy_sum / static_cast<double>(entropy_count);
  }
  return result;
}

}  // namespace relkd
