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

#include "relkd/corpus.hpp"

#include <random>

#include "relkd/distmath.hpp"
#include "relkd/toymodel.hpp"

namespace relkd {

namespace {

std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<int> sentence(const CorpusConfig& cfg, std::mt19937_64& rng) {
  const std::size_t len = uniform_size(rng, cfg.min_sentence_len, cfg.max_sentence_len);
  const std::size_t content = cfg.vocab_size - static_cast<std::size_t>(kFirstContentToken);
  const std::size_t filler = content - cfg.salient_tokens;
  std::vector<int> s;
  s.reserve(len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t offset;
    if (cfg.task == CorpusTask::Copy || unit(rng) < cfg.salient_rate) {
      offset = static_cast<std::size_t>(rng() % (cfg.task == CorpusTask::Copy ? content : cfg.salient_tokens));
    } else {
      offset = cfg.salient_tokens + static_cast<std::size_t>(rng() % filler);
    }
    s.push_back(kFirstContentToken + static_cast<int>(offset));
  }
  s.push_back(kBoundary);
  return s;
}

bool is_salient(const CorpusConfig& cfg, int token) {
  return token >= kFirstContentToken && token < kFirstContentToken + static_cast<int>(cfg.salient_tokens);
}

Example make_example(const CorpusConfig& cfg, std::mt19937_64& rng, std::string id) {
  Example ex;
  ex.id = std::move(id);
  for (;;) {
    ex.document.clear();
    const std::size_t n = uniform_size(rng, cfg.min_sentences, cfg.max_sentences);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = sentence(cfg, rng);
      ex.document.insert(ex.document.end(), s.begin(), s.end());
    }
    ex.summary.clear();
    std::size_t seen = 0;
    for (int tok : ex.document) {
      const bool keep = cfg.task == CorpusTask::Copy ? tok != kBoundary : is_salient(cfg, tok);
      if (!keep) continue;
      if (seen++ % cfg.stride == 0 && ex.summary.size() < cfg.max_summary) ex.summary.push_back(tok);
    }
    // Resample documents without any salient token.
    if (!ex.summary.empty()) return ex;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view consumer) {
  // FNV-1a over the consumer name, then a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : consumer) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void CorpusConfig::validate() const {
  if (vocab_size < static_cast<std::size_t>(kFirstContentToken) + 2) throw DomainError("corpus: vocabulary too small");
  const std::size_t content = vocab_size - static_cast<std::size_t>(kFirstContentToken);
  if (task == CorpusTask::Compress && (salient_tokens == 0 || salient_tokens >= content)) {
    throw DomainError("corpus: salient token count must leave room for filler tokens");
  }
  if (min_sentences == 0 || min_sentences > max_sentences) throw DomainError("corpus: bad sentence count range");
  if (min_sentence_len == 0 || min_sentence_len > max_sentence_len) throw DomainError("corpus: bad sentence length range");
  if (!(salient_rate > 0.0 && salient_rate <= 1.0)) throw DomainError("corpus: salient rate must lie in (0, 1]");
  if (stride == 0 || max_summary == 0) throw DomainError("corpus: stride and max_summary must be >= 1");
}

std::vector<int> Example::target() const {
  std::vector<int> t = summary;
  t.push_back(kEos);
  return t;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, "corpus"));
  Corpus c;
  c.vocab_size = cfg.vocab_size;
  c.train.reserve(cfg.train_size);
  c.test.reserve(cfg.test_size);
  for (std::size_t i = 0; i < cfg.train_size; ++i) c.train.push_back(make_example(cfg, rng, "train-" + std::to_string(i)));
  for (std::size_t i = 0; i < cfg.test_size; ++i) c.test.push_back(make_example(cfg, rng, "test-" + std::to_string(i)));
  return c;
}

std::vector<int> generate_long_document(const CorpusConfig& cfg, std::size_t min_tokens, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(seed, "long-document"));
  std::vector<int> doc;
  while (doc.size() < min_tokens) {
    const auto s = sentence(cfg, rng);
    doc.insert(doc.end(), s.begin(), s.end());
  }
  return doc;
}

std::string render_tokens(std::span<const int> tokens) {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out += ' ';
    if (t == kBos) {
      out += "<s>";
    } else if (t == kEos) {
      out += "</s>";
    } else if (t == kBoundary) {
      out += ".";
    } else {
      out += "w" + std::to_string(t);
    }
  }
  return out;
}

Route route(std::size_t document_tokens, std::size_t context_limit) {
  if (context_limit == 0) throw DomainError("route: context limit must be >= 1");
  return document_tokens <= context_limit ? Route::Direct : Route::MapReduce;
}

const char* route_name(Route r) { return r == Route::Direct ? "direct" : "mapreduce"; }

}  // namespace relkd
