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

#include "relkd/evalmetrics.hpp"

#include <algorithm>
#include <map>

#include "relkd/distmath.hpp"

namespace relkd {

namespace {

double f1(double overlap, std::size_t hyp_count, std::size_t ref_count) {
  if (hyp_count == 0 || ref_count == 0 || overlap == 0.0) return 0.0;
  const double p = overlap / static_cast<double>(hyp_count);
  const double r = overlap / static_cast<double>(ref_count);
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<int>, std::size_t> ngram_counts(std::span<const int> seq, std::size_t n) {
  std::map<std::vector<int>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace

double rouge_n(std::span<const int> hyp, std::span<const int> ref, int n) {
  if (n != 1 && n != 2) throw DomainError("rouge_n: n must be 1 or 2");
  const auto un = static_cast<std::size_t>(n);
  if (hyp.size() < un || ref.size() < un) return 0.0;
  const auto h = ngram_counts(hyp, un);
  const auto r = ngram_counts(ref, un);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : h) {
    if (auto it = r.find(gram); it != r.end()) overlap += std::min(count, it->second);
  }
  return f1(static_cast<double>(overlap), hyp.size() - un + 1, ref.size() - un + 1);
}

std::size_t lcs_length(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const int> hyp, std::span<const int> ref) {
  return f1(static_cast<double>(lcs_length(hyp, ref)), hyp.size(), ref.size());
}

RougeScores rouge(std::span<const int> hyp, std::span<const int> ref) {
  return {rouge_n(hyp, ref, 1), rouge_n(hyp, ref, 2), rouge_l(hyp, ref)};
}

RougeScores corpus_rouge(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs) {
  require_same_size(hyps.size(), refs.size(), "corpus_rouge");
  if (hyps.empty()) throw DomainError("corpus_rouge: empty evaluation set");
  RougeScores sum;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const RougeScores s = rouge(hyps[i], refs[i]);
    sum.rouge1 += s.rouge1;
    sum.rouge2 += s.rouge2;
    sum.rougeL += s.rougeL;
  }
  const double n = static_cast<double>(hyps.size());
  return {sum.rouge1 / n, sum.rouge2 / n, sum.rougeL / n};
}

RetentionReport retention(const RougeScores& student, const RougeScores& teacher) {
  if (!(teacher.rougeL > 0.0)) throw DomainError("retention: teacher ROUGE-L must be > 0");
  return {student.rougeL, teacher.rougeL, 100.0 * student.rougeL / teacher.rougeL};
}

}  // namespace relkd
