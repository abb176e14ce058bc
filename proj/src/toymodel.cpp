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

#include "relkd/toymodel.hpp"

#include <cmath>
#include <random>
#include <string>

#include "relkd/decode.hpp"

namespace relkd {

namespace {

void check_tokens(std::span<const int> tokens, std::size_t vocab_size, const char* what) {
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      throw DomainError(std::string(what) + ": token " + std::to_string(t) + " out of range");
    }
  }
}

Eigen::VectorXd step(const ToyModelParams& p, const Eigen::VectorXd& h, int token) {
  return (p.recurrence * h + p.embedding.col(token)).array().tanh().matrix();
}

}  // namespace

ToyModelParams ToyModelParams::zeros(std::size_t vocab_size, std::size_t hidden_dim) {
  const auto v = static_cast<Eigen::Index>(vocab_size);
  const auto d = static_cast<Eigen::Index>(hidden_dim);
  return {Eigen::MatrixXd::Zero(d, v), Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(v, d), std::nullopt};
}

ToyModelParams ToyModelParams::random(std::size_t vocab_size, std::size_t hidden_dim, std::uint64_t seed,
                                      double scale) {
  ToyModelParams p = zeros(vocab_size, hidden_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto* m : {&p.embedding, &p.recurrence, &p.output}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  }
  return p;
}

void ToyModelParams::validate() const {
  const auto d = embedding.rows();
  const auto v = embedding.cols();
  if (d < 1 || v < 2) throw DomainError("ToyModelParams: empty dimensions");
  if (recurrence.rows() != d || recurrence.cols() != d || output.rows() != v || output.cols() != d) {
    throw DomainError("ToyModelParams: inconsistent dimensions");
  }
  if (projection && projection->cols() != d) throw DomainError("ToyModelParams: projection width must equal d");
  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  if (!finite(embedding) || !finite(recurrence) || !finite(output) || (projection && !finite(*projection))) {
    throw DomainError("ToyModelParams: non-finite parameter");
  }
}

std::size_t ToyModelParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(embedding.size() + recurrence.size() + output.size());
  if (projection) n += static_cast<std::size_t>(projection->size());
  return n;
}

ForwardPass forward(const ToyModelParams& params, std::span<const int> document, std::span<const int> target) {
  const std::size_t v = params.vocab_size();
  check_tokens(document, v, "forward document");
  check_tokens(target, v, "forward target");

  ForwardPass pass;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.hidden_dim()));
  pass.doc_states.reserve(document.size());
  for (int x : document) {
    h = step(params, h, x);
    pass.doc_states.push_back(h);
  }
  pass.inputs.reserve(target.size());
  pass.hidden.reserve(target.size());
  pass.logits.reserve(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    const int input = t == 0 ? kBos : target[t - 1];
    pass.inputs.push_back(input);
    h = step(params, h, input);
    pass.hidden.push_back(h);
    const Eigen::VectorXd z = params.output * h;
    pass.logits.emplace_back(z.data(), z.data() + z.size());
  }
  return pass;
}

ParamGrads ParamGrads::zeros_like(const ToyModelParams& params) {
  ParamGrads g{Eigen::MatrixXd::Zero(params.embedding.rows(), params.embedding.cols()),
               Eigen::MatrixXd::Zero(params.recurrence.rows(), params.recurrence.cols()),
               Eigen::MatrixXd::Zero(params.output.rows(), params.output.cols()), std::nullopt};
  if (params.projection) g.projection = Eigen::MatrixXd::Zero(params.projection->rows(), params.projection->cols());
  return g;
}

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
  embedding += scale * other.embedding;
  recurrence += scale * other.recurrence;
  output += scale * other.output;
  if (projection && other.projection) *projection += scale * *other.projection;
}

ParamGrads backward(const ToyModelParams& params, std::span<const int> document, const ForwardPass& pass,
                    const std::vector<Logits>& grad_logits, const std::vector<Eigen::VectorXd>* grad_hidden) {
  require_same_size(grad_logits.size(), pass.hidden.size(), "backward logits");
  if (grad_hidden != nullptr) require_same_size(grad_hidden->size(), pass.hidden.size(), "backward hidden");

  ParamGrads g = ParamGrads::zeros_like(params);
  const auto d = static_cast<Eigen::Index>(params.hidden_dim());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd carry = zero;

  auto previous_state = [&](std::size_t t) -> const Eigen::VectorXd& {
    if (t > 0) return pass.hidden[t - 1];
    return pass.doc_states.empty() ? zero : pass.doc_states.back();
  };

  for (std::size_t t = pass.hidden.size(); t-- > 0;) {
    const Eigen::VectorXd& h = pass.hidden[t];
    const Eigen::Map<const Eigen::VectorXd> gz(grad_logits[t].data(), static_cast<Eigen::Index>(grad_logits[t].size()));
    g.output.noalias() += gz * h.transpose();
    Eigen::VectorXd dh = params.output.transpose() * gz + carry;
    if (grad_hidden != nullptr) dh += (*grad_hidden)[t];
    const Eigen::VectorXd da = dh.array() * (1.0 - h.array().square());
    g.recurrence.noalias() += da * previous_state(t).transpose();
    g.embedding.col(pass.inputs[t]) += da;
    carry.noalias() = params.recurrence.transpose() * da;
  }
  for (std::size_t i = document.size(); i-- > 0;) {
    const Eigen::VectorXd& h = pass.doc_states[i];
    const Eigen::VectorXd da = carry.array() * (1.0 - h.array().square());
    g.recurrence.noalias() += da * (i > 0 ? pass.doc_states[i - 1] : zero).transpose();
    g.embedding.col(document[i]) += da;
    carry.noalias() = params.recurrence.transpose() * da;
  }
  return g;
}

ToyStepModel::ToyStepModel(const ToyModelParams& params, std::span<const int> document) : params_(&params) {
  check_tokens(document, params.vocab_size(), "generate document");
  encoded_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.hidden_dim()));
  for (int x : document) encoded_ = step(params, encoded_, x);
}

ToyStepModel::State ToyStepModel::start() const { return step(*params_, encoded_, kBos); }

ToyStepModel::State ToyStepModel::advance(const State& state, int token) const { return step(*params_, state, token); }

std::vector<double> ToyStepModel::log_probs(const State& state) const {
  const Eigen::VectorXd z = params_->output * state;
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i] - lse;
  return out;
}

std::vector<int> generate(const ToyModelParams& params, std::span<const int> document, const DecodeMode& mode) {
  const ToyStepModel model(params, document);
  if (mode.beam <= 1) return greedy_decode(model, kEos, mode.max_len);
  return beam_decode(model, mode.beam, kEos, mode.max_len);
}

}  // namespace relkd
