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

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <vector>

namespace relkd {

// An autoregressive scorer: start() is the state before the first output
// token, log_probs(state) scores the next token and advance(state, tok)
// consumes one token.
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, int tok) {
  { m.start() } -> std::convertible_to<typename M::State>;
  { m.advance(s, tok) } -> std::convertible_to<typename M::State>;
  { m.log_probs(s) } -> std::convertible_to<std::vector<double>>;
};

// Argmax decoding until `eos` or `max_len` tokens. The eos token is not part
// of the returned sequence. Ties go to the lower token id.
template <StepModel M>
std::vector<int> greedy_decode(const M& model, int eos, std::size_t max_len) {
  std::vector<int> out;
  auto state = model.start();
  while (out.size() < max_len) {
    const std::vector<double> lp = model.log_probs(state);
    const int best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == eos) break;
    out.push_back(best);
    if (out.size() < max_len) state = model.advance(state, best);
  }
  return out;
}

// Beam search keeping `beam` hypotheses ranked by summed log-probability.
// Ties are broken by the lexicographically smaller token sequence (eos
// included), which makes beam == 1 coincide with greedy_decode.
template <StepModel M>
std::vector<int> beam_decode(const M& model, std::size_t beam, int eos, std::size_t max_len) {
  struct Hyp {
    std::vector<int> tokens;
    double score = 0.0;
    bool done = false;
    bool pending = false;  // state still reflects the parent prefix
    typename M::State state;
  };
  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };

  beam = std::max<std::size_t>(beam, 1);
  std::vector<Hyp> hyps;
  hyps.push_back({{}, 0.0, max_len == 0, false, model.start()});
  while (!std::all_of(hyps.begin(), hyps.end(), [](const Hyp& h) { return h.done; })) {
    std::vector<Hyp> next;
    for (const Hyp& h : hyps) {
      if (h.done) {
        next.push_back(h);
        continue;
      }
      const std::vector<double> lp = model.log_probs(h.state);
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        Hyp cand{h.tokens, h.score + lp[tok], false, false, h.state};
        cand.tokens.push_back(static_cast<int>(tok));
        if (static_cast<int>(tok) == eos) {
          cand.done = true;
        } else {
          cand.done = cand.tokens.size() >= max_len;
          cand.pending = !cand.done;
        }
        next.push_back(std::move(cand));
      }
    }
    const std::size_t keep = std::min(beam, next.size());
    std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(keep), next.end(), better);
    next.resize(keep);
    // Only survivors that will be expanded again pay for advance().
    for (Hyp& h : next) {
      if (h.pending) {
        h.state = model.advance(h.state, h.tokens.back());
        h.pending = false;
      }
    }
    hyps = std::move(next);
  }
  std::vector<int> best = std::move(hyps.front().tokens);
  if (!best.empty() && best.back() == eos) best.pop_back();
  return best;
}

}  // namespace relkd
