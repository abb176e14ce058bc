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
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relkd/corpus.hpp"
#include "relkd/losses.hpp"
#include "relkd/reliability.hpp"
#include "relkd/teachercache.hpp"
#include "relkd/toymodel.hpp"

namespace relkd {

// Training objectives. A1..A5 are the staged single-teacher ablation
// (CE, +logit KD, +pseudo-labels, +adaptive temperature, +hidden matching);
// Ewad and EwadCpdp are the two-teacher reliability-gated objectives.
enum class LossMode { CE, A2, A3, A4, A5, Ewad, EwadCpdp };

const char* loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);
const char* ewad_variant_name(EwadVariant v);
EwadVariant parse_ewad_variant(const std::string& name);

struct TrainConfig {
  LossMode mode = LossMode::CE;
  EwadVariant ewad_variant = EwadVariant::Full;
  LossWeights weights;
  ReliabilityConfig reliability;
  AdaptiveTauConfig adaptive_tau;
  MixingConfig mixing;
  double tau = 0.8;                      // fixed KD temperature when not adaptive
  double learning_rate = 0.1;
  double clip_norm = 1.0;                // global gradient-norm cap per step; 0 disables
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t context_limit = 64;
  std::size_t hidden_dim = 16;
  std::size_t teacher_hidden_dim = 24;   // projection height for the hidden-matching stage
  double init_scale = 0.3;
  std::size_t calibration_tokens = 512;  // tokens averaged into the CPDP anchor
  std::size_t val_examples = 100;        // test examples decoded after every epoch; 0 disables
  std::size_t max_summary_len = 16;

  bool uses_teacher_logits() const { return mode != LossMode::CE; }
  bool uses_second_teacher() const { return mode == LossMode::Ewad || mode == LossMode::EwadCpdp; }
  bool uses_pseudo_labels() const { return mode == LossMode::A3 || mode == LossMode::A4 || mode == LossMode::A5; }
  bool uses_adaptive_tau() const { return mode == LossMode::A4 || mode == LossMode::A5; }
  bool uses_hidden_matching() const { return mode == LossMode::A5; }
  // Loss weights with the stages that are inactive in `mode` zeroed out.
  LossWeights effective_weights() const;

  void validate() const;
};

// Key of a top-k record scored on a pseudo-label target.
std::string pseudo_record_key(const std::string& example_id, const std::string& teacher_id);

// Offline teacher signals available to the trainer.
struct TeacherSupervision {
  std::map<std::string, TopKRecord> teacher1;         // gold-forced, by example id
  std::map<std::string, TopKRecord> teacher1_pseudo;  // pseudo-forced, by pseudo_record_key
  std::map<std::string, TopKRecord> teacher2;         // gold-forced, by example id
  std::map<std::string, std::vector<PseudoLabelRecord>> pseudo;  // by example id
  std::optional<ToyModelParams> hidden_teacher;       // frozen model providing hidden-state targets

  void add_teacher1(const TopKCache& cache);
  void add_teacher1_pseudo(const TopKCache& cache);
  void add_teacher2(const TopKCache& cache);
  void add_pseudo(const PseudoCache& cache);
};

// Checks that `sup` carries every input `cfg.mode` needs for `train`.
void check_supervision(const TrainConfig& cfg, const TeacherSupervision& sup, const std::vector<Example>& train);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything needed to score one example under the configured objective.
struct ExampleInputs {
  std::span<const int> document;
  std::vector<int> target;
  const TopKRecord* teacher1 = nullptr;
  const TopKRecord* teacher2 = nullptr;
  std::optional<std::vector<Eigen::VectorXd>> teacher_hidden;
  double tau = 1.0;
};

struct Objective {
  double value = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double inter = 0.0;
  double cpdp = 0.0;
  ParamGrads grads;
  std::vector<EwadTokenTrace> trace;
};

// Loss and parameter gradients of one example; the mode decides which losses
// are chained through the model.
Objective example_objective(const ToyModelParams& params, const ExampleInputs& in, const TrainConfig& cfg,
                            const std::optional<CpdpAnchor>& anchor);

// Teacher-forced distributions of a cached record, one per position.
std::vector<ProbDist> densified(const TopKRecord& record);
std::vector<Logits> densified_logits(const TopKRecord& record);

// Mean KL(T1 || T2) over the first `cfg.calibration_tokens` gold-forced
// positions of the training set, in corpus order.
CpdpAnchor calibrate_anchor(const TrainConfig& cfg, const TeacherSupervision& sup, const std::vector<Example>& train);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double inter = 0.0;
  double cpdp = 0.0;
  double mean_tau = 0.0;
  double pseudo_fraction = 0.0;
  double val_rougeL = 0.0;
};

struct TrainResult {
  ToyModelParams params;
  std::vector<EpochMetrics> log;
  std::optional<double> entropy_running_mean;  // adaptive-temperature stages only
  std::optional<double> delta_star;            // CPDP stages only
  std::size_t routed_direct = 0;
  std::size_t routed_mapreduce = 0;
};

ToyModelParams initial_params(const TrainConfig& cfg, std::size_t vocab_size);

TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const TeacherSupervision& sup);

// Greedy decoding over `examples`, parallel over REL_KD_THREADS workers.
std::vector<std::vector<int>> generate_all(const ToyModelParams& params, const std::vector<Example>& examples,
                                           const DecodeMode& mode);

}  // namespace relkd
