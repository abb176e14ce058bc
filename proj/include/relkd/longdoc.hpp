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
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "relkd/toymodel.hpp"

namespace relkd {

// Desk-scale chunking constants. The context limit plays the role of the
// model window; capacity must fit inside it.
struct ChunkConfig {
  std::size_t capacity = 56;
  std::size_t overlap = 3;  // sentences
  double jaccard_threshold = 0.75;
  std::size_t context_limit = 64;
  std::size_t max_depth = 8;

  void validate() const;
};

using Sentence = std::vector<int>;

// Inclusive sentence range [first, last] and its concatenated tokens.
struct Chunk {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<int> tokens;
};

class LongDocError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits after every boundary token; the boundary stays with its sentence.
std::vector<Sentence> split_sentences(std::span<const int> document, int boundary = kBoundary);

// Greedy sentence accumulation up to cfg.capacity tokens. The next chunk
// starts o sentences before the end of the previous one; the overlap shrinks
// only when it must, so that every chunk adds at least one new sentence.
std::vector<Chunk> chunk(const std::vector<Sentence>& sentences, const ChunkConfig& cfg);

// |A n B| / |A u B| over token-id sets; two empty sets score 1.
double jaccard(std::span<const int> a, std::span<const int> b);

struct DedupDecision {
  std::size_t index = 0;     // position in the scanned sentence list
  bool kept = true;
  double max_jaccard = 0.0;  // against previously kept sentences
  std::size_t matched = 0;   // kept sentence that caused the drop
};

// Scans in order and drops a sentence iff its Jaccard similarity with any
// already-kept sentence exceeds `threshold`.
std::vector<Sentence> dedup(const std::vector<Sentence>& sentences, double threshold,
                            std::vector<DedupDecision>* decisions = nullptr);

using Summarizer = std::function<std::vector<int>(std::span<const int>)>;

struct LevelTrace {
  std::size_t depth = 0;  // 0 = MAP pass, >= 1 = recursive REDUCE passes
  std::size_t input_tokens = 0;
  std::vector<Chunk> chunks;
  std::vector<std::vector<int>> chunk_summaries;
  std::vector<Sentence> candidates;
  std::vector<DedupDecision> decisions;
  std::size_t output_tokens = 0;
};

struct LongDocResult {
  std::vector<int> summary;
  bool direct = false;    // document fit the context and was summarized directly
  std::size_t depth = 0;  // recursive REDUCE passes before the final one
  std::vector<LevelTrace> levels;
};

// MAP every chunk, deduplicate, concatenate and, while the result exceeds the
// context limit, repeat with the REDUCE summarizer; a final REDUCE call
// produces the summary. Chunk summaries are computed in parallel and
// reassembled in chunk order.
LongDocResult summarize_long(std::span<const int> document, const Summarizer& map_model,
                             const Summarizer& reduce_model, const ChunkConfig& cfg);

}  // namespace relkd
