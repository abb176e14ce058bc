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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <numeric>

#include "relkd/corpus.hpp"
#include "relkd/longdoc.hpp"
#include "testutil.hpp"

using namespace relkd;
using relkd::testing::Gen;

namespace {

constexpr int B = kBoundary;

// Sentences of `len` tokens (boundary included) with distinct content ids.
std::vector<Sentence> distinct_sentences(std::size_t count, std::size_t len, int first_id = 100) {
  std::vector<Sentence> out;
  int next = first_id;
  for (std::size_t i = 0; i < count; ++i) {
    Sentence s;
    for (std::size_t k = 0; k + 1 < len; ++k) s.push_back(next++);
    s.push_back(B);
    out.push_back(s);
  }
  return out;
}

std::vector<int> join(const std::vector<Sentence>& ss) {
  std::vector<int> out;
  for (const auto& s : ss) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<int> echo(std::span<const int> x) { return {x.begin(), x.end()}; }

std::vector<int> lead_sentence(std::span<const int> x) {
  const auto ss = split_sentences(x);
  return ss.empty() ? std::vector<int>{} : ss.front();
}

// Keeps the first ceil(n/2) sentences.
std::vector<int> first_half(std::span<const int> x) {
  auto ss = split_sentences(x);
  ss.resize((ss.size() + 1) / 2);
  return join(ss);
}

// Drops the last sentence when there is more than one.
std::vector<int> drop_last(std::span<const int> x) {
  auto ss = split_sentences(x);
  if (ss.size() > 1) ss.pop_back();
  return join(ss);
}

}  // namespace

TEST_CASE("split_sentences") {
  CHECK(split_sentences(std::vector<int>{5, 6, 7}) == std::vector<Sentence>{{5, 6, 7}});
  CHECK(split_sentences(std::vector<int>{5, 5, B, 5, B}) == std::vector<Sentence>{{5, 5, B}, {5, B}});
  CHECK(split_sentences(std::vector<int>{}).empty());
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> doc(static_cast<std::size_t>(g.integer(0, 40)));
    for (auto& t : doc) t = g.coin(0.2) ? B : g.integer(3, 9);
    CHECK(join(split_sentences(doc)) == doc);
  }
}

TEST_CASE("chunk hand simulation") {
  ChunkConfig cfg;
  cfg.capacity = 900;
  cfg.context_limit = 1024;
  cfg.overlap = 3;
  const auto ss = distinct_sentences(10, 100);
  const auto chunks = chunk(ss, cfg);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].first == 0);
  CHECK(chunks[0].last == 8);
  CHECK(chunks[1].first == 6);
  CHECK(chunks[1].last == 9);
  CHECK(chunks[0].tokens.size() == 900);

  const auto small = chunk(distinct_sentences(3, 100), cfg);
  REQUIRE(small.size() == 1);
  CHECK(small[0].last == 2);

  cfg.overlap = 0;
  const auto disjoint = chunk(ss, cfg);
  REQUIRE(disjoint.size() == 2);
  CHECK(disjoint[1].first == 9);

  cfg.capacity = 50;
  try {
    chunk(distinct_sentences(3, 60), cfg);
    FAIL("expected an error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("sentence 0") != std::string::npos);
  }
}

TEST_CASE("chunk invariants on random documents") {
  Gen g(2);
  for (int trial = 0; trial < 2000; ++trial) {
    ChunkConfig cfg;
    cfg.context_limit = 64;
    cfg.capacity = static_cast<std::size_t>(g.integer(8, 64));
    cfg.overlap = static_cast<std::size_t>(g.integer(0, 4));
    std::vector<Sentence> ss;
    const int n = g.integer(1, 40);
    for (int i = 0; i < n; ++i) {
      Sentence s(static_cast<std::size_t>(g.integer(1, static_cast<int>(cfg.capacity))), 5);
      s.back() = B;
      ss.push_back(s);
    }
    const auto chunks = chunk(ss, cfg);
    std::vector<int> covered(ss.size(), 0);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const auto& ch = chunks[c];
      CHECK(ch.tokens.size() <= cfg.capacity);
      std::size_t tokens = 0;
      for (std::size_t s = ch.first; s <= ch.last; ++s) {
        ++covered[s];
        tokens += ss[s].size();
      }
      CHECK(tokens == ch.tokens.size());
      if (c > 0) {
        const auto& prev = chunks[c - 1];
        CHECK(ch.last > prev.last);  // progress
        CHECK(ch.first > prev.first);
        const std::size_t overlap = prev.last + 1 - ch.first;
        CHECK(overlap <= std::min(cfg.overlap, prev.last - prev.first));
        // Overlap shrinks only when the full overlap plus the next sentence would not fit.
        if (overlap < std::min(cfg.overlap, prev.last - prev.first)) {
          std::size_t want = ss[prev.last + 1].size();
          for (std::size_t s = ch.first - 1; s <= prev.last; ++s) want += ss[s].size();
          CHECK(want > cfg.capacity);
        }
        // Greedy: the previous chunk could not take its next sentence.
        CHECK(prev.tokens.size() + ss[prev.last + 1].size() > cfg.capacity);
      }
    }
    for (int c : covered) CHECK(c >= 1);
    CHECK(chunks.front().first == 0);
    CHECK(chunks.back().last == ss.size() - 1);
  }
}

TEST_CASE("jaccard") {
  CHECK(jaccard(std::vector<int>{1, 2}, std::vector<int>{2, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard(std::vector<int>{4, 5, 4}, std::vector<int>{5, 4}) == 1.0);
  CHECK(jaccard(std::vector<int>{1}, std::vector<int>{2}) == 0.0);
  CHECK(jaccard(std::vector<int>{}, std::vector<int>{}) == 1.0);
  CHECK(jaccard(std::vector<int>{}, std::vector<int>{1}) == 0.0);
}

TEST_CASE("dedup") {
  const std::vector<Sentence> same{{1, 2, 3}, {1, 2, 3}, {3, 2, 1}};
  CHECK(dedup(same, 0.75).size() == 1);
  const std::vector<Sentence> disjoint{{1, 2}, {3, 4}, {5, 6}};
  CHECK(dedup(disjoint, 0.75) == disjoint);

  // a ~ b and b ~ c above the threshold, a and c below it: first-kept scanning keeps a and c.
  const Sentence a{1, 2, 3, 4, 5, 6, 7, 8};
  const Sentence b{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const Sentence c{3, 4, 5, 6, 7, 8, 9, 10};
  REQUIRE(jaccard(a, b) == doctest::Approx(0.8));
  REQUIRE(jaccard(b, c) == doctest::Approx(0.8));
  REQUIRE(jaccard(a, c) == doctest::Approx(0.6));
  std::vector<DedupDecision> decisions;
  CHECK(dedup({a, b, c}, 0.75, &decisions) == std::vector<Sentence>{a, c});
  REQUIRE(decisions.size() == 3);
  CHECK_FALSE(decisions[1].kept);
  CHECK(decisions[1].matched == 0);

  Gen g(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Sentence> ss(static_cast<std::size_t>(g.integer(0, 12)));
    for (auto& s : ss) {
      s.resize(static_cast<std::size_t>(g.integer(1, 5)));
      for (auto& t : s) t = g.integer(0, 6);
    }
    std::vector<DedupDecision> log;
    const auto kept = dedup(ss, 0.75, &log);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(jaccard(kept[i], kept[j]) <= 0.75);
    }
    std::size_t k = 0;
    for (const auto& d : log) {
      if (d.kept) {
        CHECK(kept[k++] == ss[d.index]);
      } else {
        CHECK(jaccard(ss[d.index], ss[d.matched]) > 0.75);
      }
    }
  }
}

TEST_CASE("short documents take the direct path") {
  const std::vector<int> doc = join(distinct_sentences(4, 8));
  ChunkConfig cfg;
  const auto r = summarize_long(doc, first_half, drop_last, cfg);
  CHECK(r.direct);
  CHECK(r.summary == first_half(doc));
}

TEST_CASE("echo MAP on a 3000-token document") {
  CorpusConfig cc;
  const auto doc = generate_long_document(cc, 3000, 7);
  REQUIRE(doc.size() >= 3000);
  ChunkConfig cfg;
  REQUIRE(route(doc.size(), cfg.context_limit) == Route::MapReduce);
  const auto r = summarize_long(doc, echo, lead_sentence, cfg);
  CHECK_FALSE(r.direct);
  CHECK(r.summary.size() <= cfg.context_limit);
  CHECK(r.depth <= cfg.max_depth);
  CHECK(r.levels.front().chunks.size() >= 2);

  // Coverage of the source sentences by the first level.
  const auto sentences = split_sentences(doc);
  std::vector<int> covered(sentences.size(), 0);
  for (const auto& ch : r.levels.front().chunks) {
    CHECK(ch.tokens.size() <= cfg.capacity);
    for (std::size_t s = ch.first; s <= ch.last; ++s) covered[s] = 1;
  }
  CHECK(std::accumulate(covered.begin(), covered.end(), 0) == static_cast<int>(sentences.size()));

  // Overlapping chunks echo duplicate sentences; dedup must remove them.
  for (const auto& level : r.levels) {
    std::vector<Sentence> kept;
    for (const auto& d : level.decisions) {
      if (d.kept) kept.push_back(level.candidates[d.index]);
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(jaccard(kept[i], kept[j]) <= cfg.jaccard_threshold);
    }
  }
  std::size_t dropped = 0;
  for (const auto& d : r.levels.front().decisions) dropped += !d.kept;
  CHECK(dropped > 0);

  const auto again = summarize_long(doc, echo, lead_sentence, cfg);
  CHECK(again.summary == r.summary);
}

TEST_CASE("recursive reduce reaches depth two") {
  ChunkConfig cfg;
  cfg.overlap = 0;
  const auto doc = join(distinct_sentences(24, 8));
  const auto r = summarize_long(doc, echo, first_half, cfg);
  CHECK(r.depth == 2);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.levels[0].output_tokens == 192);
  CHECK(r.levels[1].output_tokens == 112);
  CHECK(r.levels[2].output_tokens == 64);
  CHECK(r.summary.size() == 32);
}

TEST_CASE("non-shrinking and runaway recursion abort") {
  ChunkConfig cfg;
  cfg.overlap = 0;
  const auto doc = join(distinct_sentences(24, 8));
  try {
    summarize_long(doc, echo, echo, cfg);
    FAIL("expected abort");
  } catch (const LongDocError& e) {
    CHECK(std::string(e.what()).find("did not shrink") != std::string::npos);
  }
  const auto big = join(distinct_sentences(60, 8));
  try {
    summarize_long(big, echo, drop_last, cfg);
    FAIL("expected abort");
  } catch (const LongDocError& e) {
    CHECK(std::string(e.what()).find("depth cap 8") != std::string::npos);
  }
}

TEST_CASE("MAP parallelism does not change the result") {
  CorpusConfig cc;
  const auto doc = generate_long_document(cc, 1500, 3);
  ChunkConfig cfg;
  const auto serial = summarize_long(doc, echo, lead_sentence, cfg);
  setenv("REL_KD_THREADS", "4", 1);
  const auto threaded = summarize_long(doc, echo, lead_sentence, cfg);
  unsetenv("REL_KD_THREADS");
  CHECK(serial.summary == threaded.summary);
  CHECK(serial.levels.size() == threaded.levels.size());
  CHECK(serial.levels[0].chunk_summaries == threaded.levels[0].chunk_summaries);
}

TEST_CASE("config validation") {
  ChunkConfig cfg;
  cfg.capacity = 80;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = {};
  cfg.jaccard_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
