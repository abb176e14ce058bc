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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relkd {

// Derives an independent seed for one consumer (corpus, init, mixing, ...)
// from the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view consumer);

enum class CorpusTask { Compress, Copy };

// Synthetic summarization corpus. Documents are sentences of content tokens
// closed by the boundary token. In the compression task a token is salient
// when its id falls in the first `salient_tokens` content ids and the summary
// keeps every `stride`-th salient occurrence (capped at `max_summary`). In the
// copy task the summary is the document without boundary tokens.
struct CorpusConfig {
  std::size_t vocab_size = 64;
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  CorpusTask task = CorpusTask::Compress;
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 3;
  std::size_t min_sentence_len = 3;
  std::size_t max_sentence_len = 6;
  std::size_t salient_tokens = 4;
  double salient_rate = 0.3;
  std::size_t stride = 1;
  std::size_t max_summary = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Example {
  std::string id;
  std::vector<int> document;
  std::vector<int> summary;  // without the end token

  std::vector<int> target() const;  // summary followed by the end token
};

struct Corpus {
  std::size_t vocab_size = 0;
  std::vector<Example> train;
  std::vector<Example> test;
};

Corpus generate_corpus(const CorpusConfig& cfg);

// A single long document of at least `min_tokens` tokens drawn from the same
// sentence distribution.
std::vector<int> generate_long_document(const CorpusConfig& cfg, std::size_t min_tokens, std::uint64_t seed);

std::string render_tokens(std::span<const int> tokens);

enum class Route { Direct, MapReduce };

// Documents of at most `context_limit` tokens are summarized directly.
Route route(std::size_t document_tokens, std::size_t context_limit);
const char* route_name(Route r);

}  // namespace relkd
