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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relkd/corpus.hpp"
#include "relkd/longdoc.hpp"
#include "relkd/trainer.hpp"

namespace relkd {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;
inline constexpr int kCheckpointVersion = 1;
inline constexpr int kReportVersion = 1;

// Input files a run reads besides the config itself. Relative paths resolve
// against the config file's directory.
struct CachePaths {
  std::optional<std::filesystem::path> teacher1;
  std::optional<std::filesystem::path> teacher1_pseudo;
  std::optional<std::filesystem::path> teacher2;
  std::vector<std::filesystem::path> pseudo;
  std::optional<std::filesystem::path> hidden_teacher;  // checkpoint
};

// One complete experiment: a preset name fills every block with defaults and
// explicit fields override them.
struct ExperimentConfig {
  std::string preset = "A1";
  std::uint64_t seed = 0;
  CorpusConfig corpus;
  TrainConfig train;
  ChunkConfig chunk;
  std::size_t cache_k = 8;
  int beam_width = 4;
  CachePaths caches;

  // Runs every per-module validator; throws DomainError naming the field.
  void validate() const;
};

// Named arms: A1..A5, BASELINE, FIXED_WEIGHTS, CONFIDENCE_ONLY, AGREEMENT_ONLY,
// EWAD, EWAD_CPDP, plus TEACHER and TEACHER2 (CE models of width 24 and 32
// that produce the caches).
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Seeds every consumer from the root seed.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

struct Checkpoint {
  ToyModelParams params;
  std::optional<double> entropy_running_mean;
  std::optional<double> delta_star;
  std::string preset;
};

Json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Json epoch_to_json(const EpochMetrics& m);

// Writes `text` to `path` in one go, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace relkd
