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

#include <span>
#include <vector>

namespace relkd {

// Token-level ROUGE F1 scores.
struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

struct RetentionReport {
  double student = 0.0;
  double teacher = 0.0;
  double retention_percent = 0.0;
};

// Clipped n-gram overlap F1, n in {1, 2}. Zero when either side has no n-grams.
double rouge_n(std::span<const int> hyp, std::span<const int> ref, int n);

std::size_t lcs_length(std::span<const int> a, std::span<const int> b);

// LCS-based F1 with P = LCS/|hyp| and R = LCS/|ref|.
double rouge_l(std::span<const int> hyp, std::span<const int> ref);

RougeScores rouge(std::span<const int> hyp, std::span<const int> ref);

// Mean of per-example F1 scores; hyps and refs are aligned.
RougeScores corpus_rouge(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs);

// 100 * student ROUGE-L / teacher ROUGE-L. Can exceed 100.
RetentionReport retention(const RougeScores& student, const RougeScores& teacher);

}  // namespace relkd
