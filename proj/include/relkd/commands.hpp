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

#include "relkd/config.hpp"
#include "relkd/evalmetrics.hpp"
#include "relkd/longdoc.hpp"

namespace relkd {

// Flags shared by every subcommand.
struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;  // used when no config file is given
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::filesystem::path out = ".";
  bool trace = false;
};

// Loads the config (or preset), applies the seed override and validates.
ExperimentConfig resolve_config(const GlobalOptions& opts);

struct CacheTeacherArgs {
  std::filesystem::path checkpoint;
  std::string teacher_id = "teacher";
  bool pseudo = false;        // also write beam pseudo-labels
  bool score_pseudo = false;  // also score this teacher on its own pseudo-labels
  std::vector<std::filesystem::path> score_on;  // further pseudo caches to score
};

struct CacheTeacherResult {
  std::filesystem::path topk;
  std::optional<std::filesystem::path> pseudo;
  std::optional<std::filesystem::path> pseudo_scored;
  std::size_t records = 0;
};

// Scores the training split with a frozen teacher and writes
// <id>.topk.jsonl, <id>.pseudo.jsonl and <id>.pseudo-topk.jsonl under --out.
CacheTeacherResult cmd_cache_teacher(const GlobalOptions& opts, const CacheTeacherArgs& args);

struct DistillResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  TrainResult train;
};

// Trains the configured arm; writes checkpoint.json and metrics.jsonl.
DistillResult cmd_distill(const GlobalOptions& opts);

struct EvaluateArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> teacher_checkpoint;
};

struct EvaluateResult {
  RougeScores student;
  std::optional<RougeScores> teacher;
  std::optional<RetentionReport> retention;
  std::filesystem::path report;
};

// Greedy generation over the test split; writes report.json and
// predictions.jsonl.
EvaluateResult cmd_evaluate(const GlobalOptions& opts, const EvaluateArgs& args);

struct MapReduceArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> reduce_checkpoint;  // defaults to the MAP model
  std::optional<std::filesystem::path> input;              // rendered tokens, e.g. "w5 w9 . w4 ."
  std::size_t synthetic_tokens = 3000;                     // used when no input file is given
};

struct MapReduceResult {
  Route route = Route::Direct;
  std::vector<int> document;
  LongDocResult result;
  std::filesystem::path summary;
  std::optional<std::filesystem::path> trace;
};

// Routes one document by length and summarizes it; writes summary.json and,
// with --trace, trace.jsonl.
MapReduceResult cmd_mapreduce(const GlobalOptions& opts, const MapReduceArgs& args);

struct GateTraceArgs {
  std::filesystem::path checkpoint;
  std::vector<std::string> ids;
};

// Per-token reliability and loss records for the named training examples;
// writes gate_trace.jsonl. Returns the number of records.
std::size_t cmd_gate_trace(const GlobalOptions& opts, const GateTraceArgs& args);

// Parses "w5 w9 . w4 ." style text back into token ids.
std::vector<int> parse_tokens(const std::string& text);

// A greedy summarizer over one model, as used by the long-document pipeline.
Summarizer greedy_summarizer(const ToyModelParams& params, std::size_t max_len);

// Direct generation for short documents, MapReduce for long ones.
std::vector<int> summarize_routed(const ToyModelParams& params, std::span<const int> document,
                                  const ExperimentConfig& cfg);

// Runs the CLI on argv; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace relkd
