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

#include "relkd/commands.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "relkd/decode.hpp"
#include "relkd/parallel.hpp"

namespace relkd {

namespace {

std::string jsonl(const std::vector<Json>& lines) {
  std::string out;
  for (const auto& l : lines) out += l.dump() + "\n";
  return out;
}

Checkpoint load_model(const std::filesystem::path& path, std::size_t vocab_size) {
  Checkpoint c = load_checkpoint(path);
  if (c.params.vocab_size() != vocab_size) {
    throw DomainError("checkpoint " + path.string() + " has vocabulary " + std::to_string(c.params.vocab_size()) +
                      ", config has " + std::to_string(vocab_size));
  }
  return c;
}

TopKCache load_topk(const std::optional<std::filesystem::path>& path, const char* field, const ExperimentConfig& cfg) {
  if (!path) throw DomainError("arm " + cfg.preset + " needs caches." + field);
  TopKCache cache = read_topk_cache(*path);
  if (cache.vocab_size != cfg.corpus.vocab_size) {
    throw DomainError(std::string("caches.") + field + " has vocabulary " + std::to_string(cache.vocab_size) +
                      ", config has " + std::to_string(cfg.corpus.vocab_size));
  }
  return cache;
}

TopKRecord score(const ToyModelParams& params, const std::string& key, std::span<const int> document,
                 const std::vector<int>& target, std::size_t k) {
  const ForwardPass pass = forward(params, document, target);
  std::vector<ProbDist> dists;
  dists.reserve(pass.logits.size());
  for (const auto& z : pass.logits) dists.push_back(softmax_t(z, Temperature(1.0)));
  return make_topk_record(key, dists, k);
}

const Example& find_example(const std::vector<Example>& examples, const std::string& id) {
  for (const auto& ex : examples) {
    if (ex.id == id) return ex;
  }
  throw DomainError("unknown sample id '" + id + "'");
}

Json scores_json(const RougeScores& s) { return {{"rouge1", s.rouge1}, {"rouge2", s.rouge2}, {"rougeL", s.rougeL}}; }

std::vector<std::vector<int>> summarize_split(const ToyModelParams& params, const std::vector<Example>& examples,
                                              const ExperimentConfig& cfg) {
  std::vector<std::vector<int>> out(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) { out[i] = summarize_routed(params, examples[i].document, cfg); });
  return out;
}

}  // namespace

ExperimentConfig resolve_config(const GlobalOptions& opts) {
  ExperimentConfig cfg;
  if (opts.config) {
    if (opts.preset) throw DomainError("--preset and --config are mutually exclusive");
    cfg = load_config(*opts.config);
  } else {
    cfg = preset_config(opts.preset.value_or("A1"));
  }
  if (opts.seed) apply_seed(cfg, *opts.seed);
  cfg.validate();
  return cfg;
}

std::vector<int> parse_tokens(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    if (word == ".") {
      out.push_back(kBoundary);
    } else if (word == "<s>") {
      out.push_back(kBos);
    } else if (word == "</s>") {
      out.push_back(kEos);
    } else if (word.size() > 1 && word[0] == 'w' && word.find_first_not_of("0123456789", 1) == std::string::npos) {
      out.push_back(std::stoi(word.substr(1)));
    } else {
      throw DomainError("cannot tokenize '" + word + "'");
    }
  }
  return out;
}

Summarizer greedy_summarizer(const ToyModelParams& params, std::size_t max_len) {
  return [&params, max_len](std::span<const int> doc) { return generate(params, doc, DecodeMode{1, max_len}); };
}

std::vector<int> summarize_routed(const ToyModelParams& params, std::span<const int> document,
                                  const ExperimentConfig& cfg) {
  const Summarizer model = greedy_summarizer(params, cfg.train.max_summary_len);
  if (route(document.size(), cfg.train.context_limit) == Route::Direct) return model(document);
  return summarize_long(document, model, model, cfg.chunk).summary;
}

CacheTeacherResult cmd_cache_teacher(const GlobalOptions& opts, const CacheTeacherArgs& args) {
  const ExperimentConfig cfg = resolve_config(opts);
  if (args.teacher_id.empty() || args.teacher_id.find('@') != std::string::npos) {
    throw DomainError("teacher id must be non-empty and free of '@'");
  }
  if (args.score_pseudo && !args.pseudo) throw DomainError("--score-pseudo needs --pseudo");
  const Checkpoint teacher = load_model(args.checkpoint, cfg.corpus.vocab_size);
  std::vector<PseudoCache> extra;
  for (const auto& p : args.score_on) extra.push_back(read_pseudo_cache(p));

  const Corpus corpus = generate_corpus(cfg.corpus);
  const auto& train = corpus.train;
  const std::size_t n = train.size();
  const std::size_t k = cfg.cache_k;

  TopKCache topk{corpus.vocab_size, k, std::vector<TopKRecord>(n)};
  parallel_for(n, [&](std::size_t i) { topk.records[i] = score(teacher.params, train[i].id, train[i].document, train[i].target(), k); });

  PseudoCache pseudo{corpus.vocab_size, {}};
  if (args.pseudo) {
    std::vector<std::vector<int>> beams(n);
    const DecodeMode beam{static_cast<std::size_t>(cfg.beam_width), cfg.train.max_summary_len};
    parallel_for(n, [&](std::size_t i) { beams[i] = generate(teacher.params, train[i].document, beam); });
    for (std::size_t i = 0; i < n; ++i) {
      if (beams[i].empty()) continue;  // the example keeps its gold target
      pseudo.records.push_back({train[i].id, args.teacher_id, beams[i], render_tokens(beams[i]), cfg.beam_width});
    }
  }

  TopKCache scored{corpus.vocab_size, k, {}};
  if (args.score_pseudo || !extra.empty()) {
    std::map<std::string, const Example*> by_id;
    for (const auto& ex : train) by_id[ex.id] = &ex;
    std::vector<const PseudoLabelRecord*> labels;
    if (args.score_pseudo) {
      for (const auto& r : pseudo.records) labels.push_back(&r);
    }
    for (const auto& c : extra) {
      if (c.vocab_size != corpus.vocab_size) throw DomainError("pseudo cache vocabulary does not match the config");
      for (const auto& r : c.records) {
        if (!by_id.count(r.example_id)) throw DomainError("pseudo cache names unknown example '" + r.example_id + "'");
        labels.push_back(&r);
      }
    }
    scored.records.resize(labels.size());
    parallel_for(labels.size(), [&](std::size_t i) {
      const PseudoLabelRecord& r = *labels[i];
      std::vector<int> target = r.tokens;
      target.push_back(kEos);
      scored.records[i] =
          score(teacher.params, pseudo_record_key(r.example_id, r.teacher_id), by_id.at(r.example_id)->document, target, k);
    });
  }

  CacheTeacherResult result;
  result.records = n;
  result.topk = opts.out / (args.teacher_id + ".topk.jsonl");
  std::filesystem::create_directories(opts.out);
  write_cache(topk, result.topk);
  if (args.pseudo) {
    result.pseudo = opts.out / (args.teacher_id + ".pseudo.jsonl");
    write_cache(pseudo, *result.pseudo);
  }
  if (args.score_pseudo || !extra.empty()) {
    result.pseudo_scored = opts.out / (args.teacher_id + ".pseudo-topk.jsonl");
    write_cache(scored, *result.pseudo_scored);
  }
  return result;
}

DistillResult cmd_distill(const GlobalOptions& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const TrainConfig& tc = cfg.train;
  const Corpus corpus = generate_corpus(cfg.corpus);

  TeacherSupervision sup;
  if (tc.uses_teacher_logits()) sup.add_teacher1(load_topk(cfg.caches.teacher1, "teacher1", cfg));
  if (tc.uses_second_teacher()) sup.add_teacher2(load_topk(cfg.caches.teacher2, "teacher2", cfg));
  if (tc.uses_pseudo_labels() && tc.mixing.p_pseudo > 0.0) {
    if (cfg.caches.pseudo.empty()) throw DomainError("arm " + cfg.preset + " needs caches.pseudo");
    for (const auto& p : cfg.caches.pseudo) {
      const PseudoCache c = read_pseudo_cache(p);
      if (c.vocab_size != cfg.corpus.vocab_size) throw DomainError("caches.pseudo vocabulary does not match the config");
      sup.add_pseudo(c);
    }
    sup.add_teacher1_pseudo(load_topk(cfg.caches.teacher1_pseudo, "teacher1_pseudo", cfg));
  }
  if (tc.uses_hidden_matching()) {
    if (!cfg.caches.hidden_teacher) throw DomainError("arm " + cfg.preset + " needs caches.hidden_teacher");
    sup.hidden_teacher = load_model(*cfg.caches.hidden_teacher, cfg.corpus.vocab_size).params;
  }

  DistillResult result;
  result.train = train(tc, corpus, sup);

  Checkpoint ckpt{result.train.params, result.train.entropy_running_mean, result.train.delta_star, cfg.preset};
  std::vector<Json> metrics;
  for (const auto& m : result.train.log) metrics.push_back(epoch_to_json(m));
  result.checkpoint = opts.out / "checkpoint.json";
  result.metrics = opts.out / "metrics.jsonl";
  save_checkpoint(ckpt, result.checkpoint);
  write_text(result.metrics, jsonl(metrics));
  return result;
}

EvaluateResult cmd_evaluate(const GlobalOptions& opts, const EvaluateArgs& args) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Checkpoint student = load_model(args.checkpoint, cfg.corpus.vocab_size);
  std::optional<Checkpoint> teacher;
  if (args.teacher_checkpoint) teacher = load_model(*args.teacher_checkpoint, cfg.corpus.vocab_size);
  const Corpus corpus = generate_corpus(cfg.corpus);
  if (corpus.test.empty()) throw DomainError("evaluate: the test split is empty");

  std::vector<std::vector<int>> refs;
  for (const auto& ex : corpus.test) refs.push_back(ex.summary);
  const auto hyps = summarize_split(student.params, corpus.test, cfg);

  EvaluateResult result;
  result.student = corpus_rouge(hyps, refs);
  Json report;
  report["version"] = kReportVersion;
  report["kind"] = "evaluation";
  ExperimentConfig shown = cfg;
  shown.caches = {};
  report["config"] = config_to_json(shown);
  report["examples"] = corpus.test.size();
  report["rouge1"] = result.student.rouge1;
  report["rouge2"] = result.student.rouge2;
  report["rougeL"] = result.student.rougeL;
  if (teacher) {
    result.teacher = corpus_rouge(summarize_split(teacher->params, corpus.test, cfg), refs);
    result.retention = retention(result.student, *result.teacher);
    report["teacher"] = scores_json(*result.teacher);
    report["retention"] = result.retention->retention_percent;
  }

  std::vector<Json> predictions;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    predictions.push_back({{"version", kReportVersion},
                           {"id", corpus.test[i].id},
                           {"tokens", hyps[i]},
                           {"text", render_tokens(hyps[i])}});
  }
  result.report = opts.out / "report.json";
  write_text(result.report, report.dump(2) + "\n");
  write_text(opts.out / "predictions.jsonl", jsonl(predictions));
  return result;
}

MapReduceResult cmd_mapreduce(const GlobalOptions& opts, const MapReduceArgs& args) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Checkpoint map_model = load_model(args.checkpoint, cfg.corpus.vocab_size);
  const Checkpoint reduce_model =
      args.reduce_checkpoint ? load_model(*args.reduce_checkpoint, cfg.corpus.vocab_size) : map_model;

  MapReduceResult result;
  if (args.input) {
    std::ifstream in(*args.input);
    if (!in) throw DomainError("cannot open document " + args.input->string());
    std::stringstream text;
    text << in.rdbuf();
    result.document = parse_tokens(text.str());
    for (int t : result.document) {
      if (t < 0 || static_cast<std::size_t>(t) >= cfg.corpus.vocab_size) {
        throw DomainError("document token " + std::to_string(t) + " is outside the vocabulary");
      }
    }
  } else {
    if (args.synthetic_tokens == 0) throw DomainError("--tokens must be >= 1");
    result.document = generate_long_document(cfg.corpus, args.synthetic_tokens, derive_seed(cfg.seed, "longdoc"));
  }

  result.route = route(result.document.size(), cfg.train.context_limit);
  const std::size_t max_len = cfg.train.max_summary_len;
  result.result = summarize_long(result.document, greedy_summarizer(map_model.params, max_len),
                                 greedy_summarizer(reduce_model.params, max_len), cfg.chunk);

  const LongDocResult& r = result.result;
  Json summary;
  summary["version"] = kReportVersion;
  summary["kind"] = "mapreduce";
  summary["route"] = route_name(result.route);
  summary["input_tokens"] = result.document.size();
  summary["levels"] = r.levels.size();
  summary["depth"] = r.depth;
  summary["summary"] = r.summary;
  summary["text"] = render_tokens(r.summary);
  result.summary = opts.out / "summary.json";
  write_text(result.summary, summary.dump() + "\n");

  if (opts.trace) {
    std::vector<Json> lines;
    for (const auto& level : r.levels) {
      lines.push_back({{"version", kReportVersion},
                       {"kind", "level"},
                       {"depth", level.depth},
                       {"input_tokens", level.input_tokens},
                       {"chunks", level.chunks.size()},
                       {"output_tokens", level.output_tokens}});
      for (std::size_t i = 0; i < level.chunks.size(); ++i) {
        const Chunk& c = level.chunks[i];
        lines.push_back({{"version", kReportVersion},
                         {"kind", "chunk"},
                         {"depth", level.depth},
                         {"index", i},
                         {"first_sentence", c.first},
                         {"last_sentence", c.last},
                         {"tokens", c.tokens.size()},
                         {"summary", level.chunk_summaries[i]}});
      }
      for (const auto& d : level.decisions) {
        lines.push_back({{"version", kReportVersion},
                         {"kind", "dedup"},
                         {"depth", level.depth},
                         {"candidate", d.index},
                         {"kept", d.kept},
                         {"max_jaccard", d.max_jaccard},
                         {"matched", d.matched}});
      }
    }
    result.trace = opts.out / "trace.jsonl";
    write_text(*result.trace, jsonl(lines));
  }
  return result;
}

std::size_t cmd_gate_trace(const GlobalOptions& opts, const GateTraceArgs& args) {
  const ExperimentConfig cfg = resolve_config(opts);
  const TrainConfig& tc = cfg.train;
  if (!tc.uses_second_teacher()) throw DomainError("gate-trace needs a two-teacher arm, not " + cfg.preset);
  if (args.ids.empty()) throw DomainError("gate-trace needs at least one sample id");
  const Checkpoint student = load_model(args.checkpoint, cfg.corpus.vocab_size);
  const Corpus corpus = generate_corpus(cfg.corpus);
  std::vector<const Example*> examples;
  for (const auto& id : args.ids) examples.push_back(&find_example(corpus.train, id));

  TeacherSupervision sup;
  sup.add_teacher1(load_topk(cfg.caches.teacher1, "teacher1", cfg));
  sup.add_teacher2(load_topk(cfg.caches.teacher2, "teacher2", cfg));
  std::optional<CpdpAnchor> anchor;
  if (tc.mode == LossMode::EwadCpdp) {
    anchor = student.delta_star ? CpdpAnchor(*student.delta_star) : calibrate_anchor(tc, sup, corpus.train);
  }

  std::vector<Json> lines;
  for (const Example* ex : examples) {
    ExampleInputs in;
    in.document = ex->document;
    in.target = ex->target();
    in.teacher1 = sup.teacher1.count(ex->id) ? &sup.teacher1.at(ex->id) : nullptr;
    in.teacher2 = sup.teacher2.count(ex->id) ? &sup.teacher2.at(ex->id) : nullptr;
    in.tau = tc.tau;
    const Objective obj = example_objective(student.params, in, tc, anchor);
    for (const auto& t : obj.trace) {
      const TokenReliability& r = t.reliability;
      lines.push_back({{"version", kReportVersion},
                       {"id", ex->id},
                       {"position", t.position},
                       {"c1", r.c1},
                       {"c2", r.c2},
                       {"w1", r.w1},
                       {"w2", r.w2},
                       {"agreement", r.agreement},
                       {"lambda", r.lambda},
                       {"kd", t.kd},
                       {"ce", t.ce},
                       {"cpdp", t.cpdp}});
    }
  }
  write_text(opts.out / "gate_trace.jsonl", jsonl(lines));
  return lines.size();
}

}  // namespace relkd
