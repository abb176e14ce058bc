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

#include "relkd/longdoc.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "relkd/parallel.hpp"

namespace relkd {

void ChunkConfig::validate() const {
  if (capacity == 0 || capacity > context_limit) throw DomainError("ChunkConfig: need 0 < capacity <= context limit");
  if (!(jaccard_threshold >= 0.0 && jaccard_threshold <= 1.0)) {
    throw DomainError("ChunkConfig: Jaccard threshold must lie in [0, 1]");
  }
  if (max_depth == 0) throw DomainError("ChunkConfig: max depth must be >= 1");
}

std::vector<Sentence> split_sentences(std::span<const int> document, int boundary) {
  std::vector<Sentence> out;
  Sentence cur;
  for (int t : document) {
    cur.push_back(t);
    if (t == boundary) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<Chunk> chunk(const std::vector<Sentence>& sentences, const ChunkConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].size() > cfg.capacity) {
      throw DomainError("chunk: sentence " + std::to_string(i) + " has " + std::to_string(sentences[i].size()) +
                        " tokens, more than the chunk capacity " + std::to_string(cfg.capacity));
    }
  }
  std::vector<Chunk> chunks;
  const std::size_t n = sentences.size();
  std::size_t start = 0;
  while (start < n) {
    Chunk c;
    c.first = start;
    std::size_t end = start;
    while (end < n && c.tokens.size() + sentences[end].size() <= cfg.capacity) {
      c.tokens.insert(c.tokens.end(), sentences[end].begin(), sentences[end].end());
      ++end;
    }
    c.last = end - 1;
    chunks.push_back(std::move(c));
    if (end == n) break;

    // Overlap counts against the next chunk's capacity; drop overlap sentences
    // until the first unseen sentence fits.
    std::size_t next = end - std::min(cfg.overlap, end - start - 1);
    std::size_t tokens = sentences[end].size();
    for (std::size_t s = next; s < end; ++s) tokens += sentences[s].size();
    while (tokens > cfg.capacity) tokens -= sentences[next++].size();
    start = next;
  }
  return chunks;
}

double jaccard(std::span<const int> a, std::span<const int> b) {
  const std::set<int> sa(a.begin(), a.end());
  const std::set<int> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (int t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::vector<Sentence> dedup(const std::vector<Sentence>& sentences, double threshold,
                            std::vector<DedupDecision>* decisions) {
  std::vector<Sentence> kept;
  std::vector<std::size_t> kept_index;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    DedupDecision d{i, true, 0.0, 0};
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double j = jaccard(sentences[i], kept[k]);
      if (j > d.max_jaccard) {
        d.max_jaccard = j;
        d.matched = kept_index[k];
      }
    }
    d.kept = !(d.max_jaccard > threshold);
    if (d.kept) {
      kept.push_back(sentences[i]);
      kept_index.push_back(i);
    }
    if (decisions != nullptr) decisions->push_back(d);
  }
  return kept;
}

namespace {

LevelTrace run_level(std::span<const int> input, const Summarizer& model, const ChunkConfig& cfg, std::size_t depth) {
  LevelTrace level;
  level.depth = depth;
  level.input_tokens = input.size();
  level.chunks = chunk(split_sentences(input), cfg);
  level.chunk_summaries.resize(level.chunks.size());
  parallel_for(level.chunks.size(), [&](std::size_t i) { level.chunk_summaries[i] = model(level.chunks[i].tokens); });
  for (const auto& s : level.chunk_summaries) {
    for (auto& sentence : split_sentences(s)) {
      // Close open-ended summaries so the next level can split them again.
      if (sentence.back() != kBoundary) sentence.push_back(kBoundary);
      level.candidates.push_back(std::move(sentence));
    }
  }
  return level;
}

std::vector<int> concat(const std::vector<Sentence>& sentences) {
  std::vector<int> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

LongDocResult summarize_long(std::span<const int> document, const Summarizer& map_model,
                             const Summarizer& reduce_model, const ChunkConfig& cfg) {
  cfg.validate();
  LongDocResult result;
  if (document.size() <= cfg.context_limit) {
    // Degenerate single-chunk path: identical to direct summarization.
    LevelTrace level;
    level.input_tokens = document.size();
    const auto sentences = split_sentences(document);
    level.chunks.push_back({0, sentences.empty() ? 0 : sentences.size() - 1, {document.begin(), document.end()}});
    result.summary = map_model(document);
    level.chunk_summaries.push_back(result.summary);
    level.output_tokens = result.summary.size();
    result.levels.push_back(std::move(level));
    result.direct = true;
    return result;
  }

  LevelTrace level = run_level(document, map_model, cfg, 0);
  std::vector<int> current = concat(dedup(level.candidates, cfg.jaccard_threshold, &level.decisions));
  level.output_tokens = current.size();
  result.levels.push_back(std::move(level));

  while (current.size() > cfg.context_limit) {
    if (++result.depth > cfg.max_depth) {
      throw LongDocError("summarize_long: recursion depth cap " + std::to_string(cfg.max_depth) + " reached with " +
                         std::to_string(current.size()) + " tokens left");
    }
    LevelTrace next = run_level(current, reduce_model, cfg, result.depth);
    std::vector<int> reduced = concat(dedup(next.candidates, cfg.jaccard_threshold, &next.decisions));
    next.output_tokens = reduced.size();
    result.levels.push_back(std::move(next));
    if (reduced.size() >= current.size()) {
      throw LongDocError("summarize_long: reduce pass at depth " + std::to_string(result.depth) +
                         " did not shrink its input (" + std::to_string(current.size()) + " -> " +
                         std::to_string(reduced.size()) + " tokens)");
    }
    current = std::move(reduced);
  }
  result.summary = reduce_model(current);
  return result;
}

}  // namespace relkd
