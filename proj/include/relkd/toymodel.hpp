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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relkd/distmath.hpp"

namespace relkd {

// Reserved token ids shared by every toy vocabulary.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kBoundary = 2;
inline constexpr int kFirstContentToken = 3;

// Parameters of the tanh recurrent summarizer. The document is read with the
// same recurrence that then decodes the summary:
//   h_t = tanh(R h_{t-1} + E[x_t]),  logits_t = O h_t.
struct ToyModelParams {
  Eigen::MatrixXd embedding;   // d x |V|, column per token
  Eigen::MatrixXd recurrence;  // d x d
  Eigen::MatrixXd output;      // |V| x d
  // Student-to-teacher hidden projection (d_T x d), present only when the
  // inter-match objective is trained.
  std::optional<Eigen::MatrixXd> projection;

  std::size_t vocab_size() const { return static_cast<std::size_t>(embedding.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(embedding.rows()); }

  static ToyModelParams zeros(std::size_t vocab_size, std::size_t hidden_dim);
  static ToyModelParams random(std::size_t vocab_size, std::size_t hidden_dim, std::uint64_t seed, double scale);

  void validate() const;
  std::size_t parameter_count() const;
};

struct ForwardPass {
  std::vector<Eigen::VectorXd> doc_states;  // state after each document token
  std::vector<int> inputs;                  // decoder inputs: BOS then target[0..m-2]
  std::vector<Eigen::VectorXd> hidden;      // decoder state per target position
  std::vector<Logits> logits;               // per target position
};

// Teacher-forced pass over `target` after reading `document`.
ForwardPass forward(const ToyModelParams& params, std::span<const int> document, std::span<const int> target);

struct ParamGrads {
  Eigen::MatrixXd embedding;
  Eigen::MatrixXd recurrence;
  Eigen::MatrixXd output;
  std::optional<Eigen::MatrixXd> projection;

  static ParamGrads zeros_like(const ToyModelParams& params);
  void add_scaled(const ParamGrads& other, double scale);
};

// Backpropagation through time from per-position logit gradients and optional
// extra gradients on the decoder hidden states.
ParamGrads backward(const ToyModelParams& params, std::span<const int> document, const ForwardPass& pass,
                    const std::vector<Logits>& grad_logits, const std::vector<Eigen::VectorXd>* grad_hidden);

// Decoding adaptor for the generic greedy/beam routines.
class ToyStepModel {
 public:
  using State = Eigen::VectorXd;

  ToyStepModel(const ToyModelParams& params, std::span<const int> document);
  State start() const;
  State advance(const State& state, int token) const;
  std::vector<double> log_probs(const State& state) const;

 private:
  const ToyModelParams* params_;
  Eigen::VectorXd encoded_;
};

struct DecodeMode {
  std::size_t beam = 1;  // 1 = greedy
  std::size_t max_len = 16;
};

std::vector<int> generate(const ToyModelParams& params, std::span<const int> document, const DecodeMode& mode);

}  // namespace relkd
