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

#include <iostream>

#include <CLI11.hpp>

#include "relkd/commands.hpp"

namespace relkd {

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Reliability-aware multi-teacher distillation laboratory", "relkd"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions opts;
  std::string config, preset, out = ".";
  std::uint64_t seed = 0;
  app.add_option("--config", config, "experiment config (JSON)");
  app.add_option("--preset", preset, "named arm used when no config is given")
      ->check(CLI::IsMember(preset_names()));
  auto* seed_opt = app.add_option("--seed", seed, "root seed");
  app.add_option("--out", out, "output directory");
  app.add_flag("--trace", opts.trace, "dump intermediate artifacts");

  CacheTeacherArgs cache_args;
  std::string cache_ckpt;
  auto* cache = app.add_subcommand("cache-teacher", "score the training split with a frozen teacher");
  cache->add_option("--checkpoint", cache_ckpt, "teacher checkpoint")->required();
  cache->add_option("--id", cache_args.teacher_id, "teacher id used in file names and pseudo-labels");
  cache->add_flag("--pseudo", cache_args.pseudo, "write beam pseudo-labels");
  cache->add_flag("--score-pseudo", cache_args.score_pseudo, "score the teacher on its own pseudo-labels");
  std::vector<std::string> score_on;
  cache->add_option("--score-on", score_on, "further pseudo-label caches to score");

  auto* distill = app.add_subcommand("distill", "train the configured arm");

  EvaluateArgs eval_args;
  std::string eval_ckpt, eval_teacher;
  auto* evaluate = app.add_subcommand("evaluate", "ROUGE on the test split");
  evaluate->add_option("--checkpoint", eval_ckpt, "student checkpoint")->required();
  evaluate->add_option("--teacher", eval_teacher, "teacher checkpoint for retention");

  MapReduceArgs mr_args;
  std::string mr_ckpt, mr_reduce, mr_input;
  auto* mapreduce = app.add_subcommand("mapreduce", "summarize one document with length-aware routing");
  mapreduce->add_option("--checkpoint", mr_ckpt, "MAP model checkpoint")->required();
  mapreduce->add_option("--reduce-checkpoint", mr_reduce, "REDUCE model checkpoint (default: MAP model)");
  auto* input_opt = mapreduce->add_option("--input", mr_input, "document of rendered tokens");
  mapreduce->add_option("--tokens", mr_args.synthetic_tokens, "length of the synthetic document")
      ->excludes(input_opt);

  GateTraceArgs gate_args;
  std::string gate_ckpt;
  auto* gate = app.add_subcommand("gate-trace", "per-token reliability records");
  gate->add_option("--checkpoint", gate_ckpt, "student checkpoint")->required();
  gate->add_option("--ids", gate_args.ids, "training sample ids")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!config.empty()) opts.config = config;
    if (!preset.empty()) opts.preset = preset;
    if (seed_opt->count() > 0) opts.seed = seed;
    opts.out = out;
    if (*cache) {
      cache_args.checkpoint = cache_ckpt;
      for (const auto& p : score_on) cache_args.score_on.emplace_back(p);
      const auto r = cmd_cache_teacher(opts, cache_args);
      std::cout << "wrote " << r.records << " records to " << r.topk.string() << "\n";
    } else if (*distill) {
      const auto r = cmd_distill(opts);
      const auto& last = r.train.log.empty() ? EpochMetrics{} : r.train.log.back();
      std::cout << "epochs " << r.train.log.size() << " loss " << last.loss << " val rougeL " << last.val_rougeL
                << "\n";
    } else if (*evaluate) {
      eval_args.checkpoint = eval_ckpt;
      if (!eval_teacher.empty()) eval_args.teacher_checkpoint = eval_teacher;
      const auto r = cmd_evaluate(opts, eval_args);
      std::cout << "rouge1 " << r.student.rouge1 << " rouge2 " << r.student.rouge2 << " rougeL " << r.student.rougeL;
      if (r.retention) std::cout << " retention " << r.retention->retention_percent;
      std::cout << "\n";
    } else if (*mapreduce) {
      mr_args.checkpoint = mr_ckpt;
      if (!mr_reduce.empty()) mr_args.reduce_checkpoint = mr_reduce;
      if (!mr_input.empty()) mr_args.input = mr_input;
      const auto r = cmd_mapreduce(opts, mr_args);
      std::cout << route_name(r.route) << " " << r.document.size() << " tokens -> " << r.result.summary.size()
                << " tokens\n";
    } else if (*gate) {
      gate_args.checkpoint = gate_ckpt;
      std::cout << cmd_gate_trace(opts, gate_args) << " records\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "relkd: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace relkd
