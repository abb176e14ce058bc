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
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "relkd/distmath.hpp"

namespace relkd {

inline constexpr int kCacheVersion = 1;

// I/O and schema failures while reading or writing cache files.
class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TopKEntry {
  int token = 0;
  double logprob = 0.0;

  friend bool operator==(const TopKEntry&, const TopKEntry&) = default;
};

// Top-k teacher log-probabilities at every target position of one example,
// sorted by descending log-probability.
struct TopKRecord {
  std::string example_id;
  std::size_t vocab_size = 0;
  std::vector<std::vector<TopKEntry>> positions;

  void validate(std::size_t k) const;
  friend bool operator==(const TopKRecord&, const TopKRecord&) = default;
};

struct PseudoLabelRecord {
  std::string example_id;
  std::string teacher_id;
  std::vector<int> tokens;
  std::string text;
  int beam_width = 4;

  void validate(std::size_t vocab_size) const;
  friend bool operator==(const PseudoLabelRecord&, const PseudoLabelRecord&) = default;
};

struct TopKCache {
  std::size_t vocab_size = 0;
  std::size_t k = 0;
  std::vector<TopKRecord> records;

  friend bool operator==(const TopKCache&, const TopKCache&) = default;
};

struct PseudoCache {
  std::size_t vocab_size = 0;
  std::vector<PseudoLabelRecord> records;

  friend bool operator==(const PseudoCache&, const PseudoCache&) = default;
};

// Both writers validate every record before touching the file and return the
// number of data lines written.
std::size_t write_cache(const TopKCache& cache, const std::filesystem::path& path);
std::size_t write_cache(const PseudoCache& cache, const std::filesystem::path& path);

std::variant<TopKCache, PseudoCache> read_cache(const std::filesystem::path& path);
TopKCache read_topk_cache(const std::filesystem::path& path);
PseudoCache read_pseudo_cache(const std::filesystem::path& path);

// Keeps the k most probable tokens of each distribution; ties go to the lower id.
TopKRecord make_topk_record(std::string example_id, std::span<const ProbDist> positions, std::size_t k);

// Renormalizes the cached mass over its support; unlisted tokens get zero.
ProbDist densify(const TopKRecord& record, std::size_t position);

struct MixingConfig {
  double p_pseudo = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TargetChoice {
  std::vector<int> tokens;
  bool pseudo = false;
  std::string teacher_id;  // empty when the gold target was kept
};

// With probability p_pseudo replaces the gold target by a pseudo-label drawn
// uniformly from `pseudo`. Pure function of (seed, example_index).
TargetChoice sample_target(std::span<const int> gold, std::span<const PseudoLabelRecord> pseudo,
                           const MixingConfig& cfg, std::uint64_t example_index);

}  // namespace relkd
