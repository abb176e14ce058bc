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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "lossoracle.hpp"
#include "relkd/commands.hpp"
#include "relkd/reliability.hpp"

using namespace relkd;
using namespace relkd::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "relkd_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<Json> read_jsonl(const fs::path& p) {
  std::vector<Json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(Json::parse(line));
  return out;
}

fs::path write_json(const fs::path& p, const Json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << "\n";
  return p;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const Loss losses[] = {Loss::CE, Loss::KD, Loss::Inter, Loss::Standard, Loss::Ewad, Loss::Cpdp, Loss::Combined};
  Gen g(1001);
  double worst = 0.0;
  std::string worst_loss;
  std::size_t failures = 0;
  for (Loss l : losses) {
    for (int i = 0; i < 100; ++i) {
      const double e = gradient_error(l, g);
      if (!(e <= 1e-5)) ++failures;
      if (!(e <= worst)) {
        worst = e;
        worst_loss = loss_label(l);
      }
    }
  }
  return {failures == 0, "7 losses x 100 instances, worst relative error " + fmt("%.2e", worst) + " (" + worst_loss +
                             "), " + std::to_string(failures) + " above 1e-5"};
}

Outcome oracle_equivalence() {
  Gen g(2002);
  const ReliabilityConfig rcfg;
  const LossWeights w;
  double worst_ewad = 0.0, worst_cpdp = 0.0;
  const EwadVariant variants[] = {EwadVariant::Full, EwadVariant::FixedWeights, EwadVariant::ConfidenceOnly,
                                  EwadVariant::AgreementOnly};
  for (int i = 0; i < 1000; ++i) {
    const Instance in = random_instance(g);
    const double tau = g.uniform(0.5, 2.0);
    const EwadVariant v = variants[i % 4];
    OracleGate gate;
    EwadRouting routing;
    if (v == EwadVariant::FixedWeights || v == EwadVariant::ConfidenceOnly) routing.fixed_lambda = gate.lambda = 1.0;
    if (v == EwadVariant::FixedWeights || v == EwadVariant::AgreementOnly) routing.fixed_w1 = gate.w1 = 0.5;
    worst_ewad = std::max(worst_ewad,
                          std::abs(ewad_loss(in.batch, rcfg, Temperature(tau), routing).value - o_ewad(in.batch, gate, tau)));
    const double d = g.uniform(-1.0, 1.0);
    worst_cpdp = std::max(worst_cpdp, std::abs(cpdp_loss(in.batch, CpdpAnchor(d), w).value -
                                               o_cpdp(in.batch, d, w.cpdp_clamp())));
  }
  const bool ok = worst_ewad <= 1e-10 && worst_cpdp <= 1e-10;
  return {ok, "1000 instances, max |EWAD - oracle| " + fmt("%.1e", worst_ewad) + ", max |CPDP - oracle| " +
                  fmt("%.1e", worst_cpdp)};
}

Outcome gate_constants() {
  const ReliabilityConfig cfg;
  const double g1 = gate(1.0, cfg), g0 = gate(0.0, cfg), gm = gate(0.5, cfg);
  const bool ok = cfg.gate_steepness == 5.0 && cfg.gate_threshold == 0.5 && std::abs(g1 - 0.924142) <= 1e-6 &&
                  std::abs(g0 - 0.075858) <= 1e-6 && gm == 0.5;
  return {ok, "gate(1)=" + fmt("%.7f", g1) + " gate(0)=" + fmt("%.7f", g0) + " gate(0.5)=" + fmt("%.17g", gm)};
}

Outcome adaptive_temperature() {
  const AdaptiveTauConfig cfg;
  Gen g(4004);
  double worst_mid = 0.0;
  double lo = 2.0, hi = 0.5;
  std::size_t emitted = 0;
  for (int b = 0; b < 200; ++b) {
    const std::size_t vocab = static_cast<std::size_t>(g.integer(2, 64));
    const int batch = g.integer(1, 16);
    std::vector<std::vector<ProbDist>> samples;
    std::vector<double> h;
    for (int s = 0; s < batch; ++s) {
      std::vector<ProbDist> seq;
      for (int t = g.integer(1, 8); t > 0; --t) seq.push_back(g.dist(vocab, g.coin(0.3)));
      h.push_back(mean_masked_entropy(seq, full_mask(seq.size())));
      samples.push_back(std::move(seq));
    }
    double mean = 0.0;
    for (double v : h) mean += v / static_cast<double>(batch);
    for (int s = 0; s < batch; ++s) {
      const auto& seq = samples[static_cast<std::size_t>(s)];
      const double tau = adaptive_tau(seq, full_mask(seq.size()), mean, cfg).value();
      lo = std::min(lo, tau);
      hi = std::max(hi, tau);
      ++emitted;
      // The midpoint case: the sample's own entropy as the batch mean.
      const double mid = adaptive_tau(seq, full_mask(seq.size()), h[static_cast<std::size_t>(s)], cfg).value();
      worst_mid = std::max(worst_mid, std::abs(mid - 1.25));
    }
  }
  const bool ok = cfg.tau_min == 0.5 && cfg.tau_max == 2.0 && worst_mid <= 1e-9 && lo > 0.5 && hi < 2.0;
  return {ok, "midpoint error " + fmt("%.1e", worst_mid) + ", " + std::to_string(emitted) + " emitted tau in [" +
                  fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]"};
}

Outcome mixing_rate() {
  const MixingConfig cfg{0.3, derive_seed(8, "mixing")};
  const std::vector<int> gold{5, 6, 1};
  const std::vector<PseudoLabelRecord> pseudo{{"x", "t1", {7}, "w7", 4}, {"x", "t2", {8, 9}, "w8 w9", 4}};
  std::size_t hits = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) hits += sample_target(gold, pseudo, cfg, i).pseudo ? 1 : 0;
  const double frac = static_cast<double>(hits) / 10000.0;
  return {frac >= 0.285 && frac <= 0.315, "pseudo fraction " + fmt("%.4f", frac) + " over 10000 draws"};
}

Outcome retention_rows() {
  const double a = retention({0, 0, 0.308}, {0, 0, 0.372}).retention_percent;
  const double b = retention({0, 0, 0.491}, {0, 0, 0.401}).retention_percent;
  return {std::abs(a - 82.8) <= 0.3 && std::abs(b - 122.4) <= 0.1,
          "(.308,.372) -> " + fmt("%.2f", a) + ", (.491,.401) -> " + fmt("%.2f", b)};
}

// ---------------------------------------------------------------------------
// Invariant suites, 1000 randomized cases each.

std::size_t lcs_brute(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    std::vector<int> sub;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask & (1u << i)) sub.push_back(a[i]);
    }
    std::size_t j = 0;
    for (int x : b) {
      if (j < sub.size() && sub[j] == x) ++j;
    }
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

std::vector<int> random_seq(Gen& g, int max_len, int alphabet) {
  std::vector<int> s(static_cast<std::size_t>(g.integer(0, max_len)));
  for (auto& x : s) x = g.integer(3, 2 + alphabet);
  return s;
}

Outcome invariant_suites() {
  Gen g(6006);
  std::map<std::string, std::size_t> violations;
  std::size_t cases = 0;
  auto check = [&](const char* suite, bool ok) {
    if (!ok) ++violations[suite];
  };
  constexpr int kPerSuite = 1000;
  const double ln2 = std::log(2.0);

  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const auto z = g.logits(static_cast<std::size_t>(g.integer(2, 64)), g.uniform(0.1, 200.0));
    const ProbDist p = softmax_t(z, Temperature(g.uniform(0.05, 5.0)));
    double s = 0.0;
    bool nonneg = true;
    for (double v : p.values()) {
      s += v;
      nonneg = nonneg && v >= 0.0;
    }
    check("normalization", nonneg && std::abs(s - 1.0) <= 1e-12);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 32));
    const ProbDist p = g.dist(n, g.coin()), q = g.dist(n, g.coin());
    check("kl", kl(p, q) >= 0.0 && std::abs(kl(p, p)) <= 1e-12);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 32));
    const ProbDist p = g.dist(n, g.coin()), q = g.dist(n, g.coin());
    const double j = jsd(p, q);
    check("jsd", j >= 0.0 && j <= ln2 + 1e-15 && std::abs(j - jsd(q, p)) <= 1e-15);
  }
  const ReliabilityConfig rcfg;
  const double gate_lo = gate(0.0, rcfg), gate_hi = gate(1.0, rcfg);
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 32));
    const ProbDist p = g.dist(n, g.coin()), q = g.dist(n, g.coin());
    const double a = agreement(p, q), c = confidence(p), lam = gate(a, rcfg);
    check("agreement/gate", a >= 0.0 && a <= 1.0 && c >= 0.0 && c <= 1.0 && lam >= gate_lo && lam <= gate_hi);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const ReliabilityConfig wcfg{5.0, 0.5, g.uniform(0.05, 5.0)};
    const auto [w1, w2] = confidence_weights(g.uniform(0, 1), g.uniform(0, 1), wcfg);
    const double kd = g.uniform(0, 1);
    const LossWeights lw(kd, g.uniform(0, 1 - kd));
    check("weight simplex", w1 > 0.0 && w2 > 0.0 && std::abs(w1 + w2 - 1.0) <= 1e-15 &&
                                std::abs(lw.alpha_hard() + lw.alpha_kd() + lw.alpha_inter() - 1.0) <= 1e-15 &&
                                lw.alpha_hard() >= -1e-15);
  }
  const fs::path cache_dir = workdir() / "roundtrip";
  fs::create_directories(cache_dir);
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const std::size_t vocab = static_cast<std::size_t>(g.integer(2, 40));
    const std::size_t k = static_cast<std::size_t>(g.integer(1, static_cast<int>(vocab)));
    TopKCache cache{vocab, k, {}};
    for (int r = g.integer(0, 3); r > 0; --r) {
      std::vector<ProbDist> pos;
      for (int t = g.integer(1, 5); t > 0; --t) pos.push_back(g.dist(vocab, g.coin()));
      cache.records.push_back(make_topk_record("ex-" + std::to_string(r) + "-\"q\"", pos, k));
    }
    const fs::path p = cache_dir / "c.jsonl";
    write_cache(cache, p);
    check("cache round trip", read_topk_cache(p) == cache);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    ChunkConfig cfg;
    cfg.context_limit = 64;
    cfg.capacity = static_cast<std::size_t>(g.integer(4, 64));
    cfg.overlap = static_cast<std::size_t>(g.integer(0, 5));
    std::vector<Sentence> sentences;
    for (int s = g.integer(0, 40); s > 0; --s) {
      Sentence x(static_cast<std::size_t>(g.integer(1, static_cast<int>(cfg.capacity))), 3);
      x.back() = kBoundary;
      sentences.push_back(x);
    }
    const auto chunks = chunk(sentences, cfg);
    std::vector<int> covered(sentences.size(), 0);
    bool ok = sentences.empty() == chunks.empty();
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      ok = ok && chunks[c].tokens.size() <= cfg.capacity && chunks[c].first <= chunks[c].last;
      if (c > 0) ok = ok && chunks[c].first > chunks[c - 1].first && chunks[c].first <= chunks[c - 1].last + 1;
      for (std::size_t s = chunks[c].first; s <= chunks[c].last && s < covered.size(); ++s) covered[s] = 1;
    }
    for (int v : covered) ok = ok && v == 1;
    check("chunk coverage/capacity", ok);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    std::vector<Sentence> sentences;
    const int alphabet = g.integer(2, 10);
    for (int s = g.integer(0, 12); s > 0; --s) sentences.push_back(random_seq(g, 6, alphabet));
    const auto kept = dedup(sentences, 0.75);
    bool ok = true;
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = a + 1; b < kept.size(); ++b) ok = ok && !(jaccard(kept[a], kept[b]) > 0.75);
    }
    check("dedup soundness", ok);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const auto a = random_seq(g, 12, 6), b = random_seq(g, 12, 6);
    const RougeScores r = rouge(a, b);
    check("rouge bounds", r.rouge1 >= 0.0 && r.rouge1 <= 1.0 && r.rouge2 >= 0.0 && r.rouge2 <= 1.0 &&
                              r.rougeL >= 0.0 && r.rougeL <= 1.0 && r.rougeL <= r.rouge1 + 1e-15);
  }
  for (int i = 0; i < kPerSuite; ++i, ++cases) {
    const auto a = random_seq(g, 9, 4), b = random_seq(g, 9, 4);
    check("lcs oracle", lcs_length(a, b) == lcs_brute(a, b));
  }

  std::string detail = std::to_string(cases) + " cases over 10 suites";
  for (const auto& [suite, n] : violations) detail += ", " + suite + ": " + std::to_string(n) + " violations";
  return {violations.empty() && cases >= 10000, detail};
}

// ---------------------------------------------------------------------------
// Pipeline criteria, driven through the subcommands.

Json config_json(const std::string& preset, std::uint64_t seed, const Json& caches = Json::object()) {
  return {{"version", 1}, {"preset", preset}, {"seed", seed}, {"caches", caches}};
}

GlobalOptions options(const fs::path& config, const fs::path& out) {
  GlobalOptions o;
  o.config = config;
  o.out = out;
  return o;
}

// Teacher checkpoint and caches for one seed of the desk-scale experiment.
struct SeedRun {
  double teacher = 0.0, a1 = 0.0, a2 = 0.0;
};

std::map<std::uint64_t, fs::path> g_teachers;

SeedRun desk_scale_seed(std::uint64_t seed) {
  const fs::path dir = workdir() / ("desk_seed" + std::to_string(seed));
  const fs::path teacher_cfg = write_json(dir / "teacher.json", config_json("TEACHER", seed));
  cmd_distill(options(teacher_cfg, dir / "teacher"));
  const fs::path teacher_ckpt = dir / "teacher/checkpoint.json";
  g_teachers[seed] = teacher_ckpt;
  CacheTeacherArgs cache_args;
  cache_args.checkpoint = teacher_ckpt;
  cache_args.teacher_id = "t1";
  cmd_cache_teacher(options(teacher_cfg, dir / "caches"), cache_args);

  const fs::path a1_cfg = write_json(dir / "a1.json", config_json("A1", seed));
  const fs::path a2_cfg = write_json(dir / "a2.json", config_json("A2", seed, {{"teacher1", "caches/t1.topk.jsonl"}}));
  cmd_distill(options(a1_cfg, dir / "a1"));
  cmd_distill(options(a2_cfg, dir / "a2"));

  SeedRun r;
  r.a1 = cmd_evaluate(options(a1_cfg, dir / "a1"), {dir / "a1/checkpoint.json", teacher_ckpt}).student.rougeL;
  const EvaluateResult a2 = cmd_evaluate(options(a2_cfg, dir / "a2"), {dir / "a2/checkpoint.json", teacher_ckpt});
  r.a2 = a2.student.rougeL;
  r.teacher = a2.teacher->rougeL;
  return r;
}

Outcome desk_scale_direction() {
  double t = 0.0, a1 = 0.0, a2 = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SeedRun r = desk_scale_seed(seed);
    t += r.teacher / 5.0;
    a1 += r.a1 / 5.0;
    a2 += r.a2 / 5.0;
    per_seed += (seed ? " " : "") + fmt("%.3f", r.a1) + "/" + fmt("%.3f", r.a2);
  }
  return {a2 >= a1 - 0.01, "mean ROUGE-L A1 " + fmt("%.4f", a1) + ", A2 " + fmt("%.4f", a2) + ", teacher " +
                               fmt("%.4f", t) + " (per seed A1/A2: " + per_seed + ")"};
}

Outcome cpdp_guard() {
  Gen g(5005);
  const LossWeights w;
  const ReliabilityConfig rcfg;
  double worst = 0.0;
  std::size_t records = 0, clamped = 0;
  double max_value = 0.0;
  for (int i = 0; i < 200; ++i) {
    Instance in = random_instance(g);
    if (i % 2 == 1) {
      // Near-deterministic students drive the entropy toward the floor.
      for (auto& z : in.batch.student_logits) z[static_cast<std::size_t>(g.integer(0, static_cast<int>(z.size()) - 1))] += g.uniform(20.0, 700.0);
    }
    const CpdpAnchor anchor(g.uniform(-0.5, 0.5));
    const CpdpResult r = cpdp_loss(in.batch, anchor, w);
    const auto frozen = o_student_entropies(in.batch);
    worst = std::max(worst, logit_gradcheck(in.batch, r.grad, [&](const TokenBatch& x) {
                       return o_cpdp(x, anchor.delta_star(), w.cpdp_clamp(), &frozen);
                     }));
    const CombinedResult c = combined_total(in.batch, rcfg, anchor, w, Temperature(0.8));
    for (const auto& t : c.trace) {
      ++records;
      max_value = std::max(max_value, t.cpdp);
      if (t.cpdp == w.cpdp_clamp()) ++clamped;
    }
  }

  // Traces emitted by the CLI for a CPDP-trained student and two teachers.
  const fs::path dir = workdir() / "cpdp_guard";
  const Json small = {{"train_size", 200}, {"test_size", 20}};
  Json t1 = config_json("TEACHER", 11);
  Json t2 = config_json("TEACHER2", 11);
  for (Json* j : {&t1, &t2}) {
    (*j)["corpus"] = small;
    (*j)["train"] = {{"epochs", 8}, {"val_examples", 0}};
  }
  cmd_distill(options(write_json(dir / "t1.json", t1), dir / "t1"));
  cmd_distill(options(write_json(dir / "t2.json", t2), dir / "t2"));
  CacheTeacherArgs c1, c2;
  c1.checkpoint = dir / "t1/checkpoint.json";
  c1.teacher_id = "t1";
  c2.checkpoint = dir / "t2/checkpoint.json";
  c2.teacher_id = "t2";
  cmd_cache_teacher(options(dir / "t1.json", dir / "caches"), c1);
  cmd_cache_teacher(options(dir / "t2.json", dir / "caches"), c2);
  Json student = config_json("EWAD_CPDP", 11, {{"teacher1", "caches/t1.topk.jsonl"}, {"teacher2", "caches/t2.topk.jsonl"}});
  student["corpus"] = small;
  student["train"] = {{"epochs", 8}, {"val_examples", 0}};
  const fs::path student_cfg = write_json(dir / "student.json", student);
  cmd_distill(options(student_cfg, dir / "student"));
  GateTraceArgs ga;
  ga.checkpoint = dir / "student/checkpoint.json";
  for (int i = 0; i < 200; ++i) ga.ids.push_back("train-" + std::to_string(i));
  cmd_gate_trace(options(student_cfg, dir / "student"), ga);
  std::size_t cli_records = 0;
  for (const auto& line : read_jsonl(dir / "student/gate_trace.jsonl")) {
    ++cli_records;
    max_value = std::max(max_value, line["cpdp"].get<double>());
  }

  const bool ok = worst <= 1e-5 && max_value <= w.cpdp_clamp() && clamped > 0 && cli_records > 0;
  return {ok, "frozen-entropy gradient error " + fmt("%.1e", worst) + "; max per-token value " + fmt("%.3f", max_value) +
                  " over " + std::to_string(records + cli_records) + " trace records (" + std::to_string(clamped) +
                  " at the clamp, " + std::to_string(cli_records) + " from gate-trace)"};
}

Outcome mapreduce_end_to_end() {
  if (!g_teachers.count(0)) desk_scale_seed(0);
  const fs::path dir = workdir() / "mapreduce";
  const fs::path cfg = write_json(dir / "config.json", config_json("TEACHER", 0));
  GlobalOptions o = options(cfg, dir / "out");
  o.trace = true;
  MapReduceArgs args;
  args.checkpoint = g_teachers.at(0);
  args.synthetic_tokens = 3000;
  const MapReduceResult r = cmd_mapreduce(o, args);

  const ExperimentConfig ec = load_config(cfg);
  const std::size_t n_sentences = split_sentences(r.document).size();
  std::vector<int> covered(n_sentences, 0);
  bool capacity_ok = true;
  std::size_t chunks0 = 0, max_depth = 0;
  for (const auto& line : read_jsonl(*r.trace)) {
    if (line["kind"] != "chunk") continue;
    capacity_ok = capacity_ok && line["tokens"].get<std::size_t>() <= ec.chunk.capacity;
    max_depth = std::max(max_depth, line["depth"].get<std::size_t>());
    if (line["depth"] != 0) continue;
    ++chunks0;
    for (std::size_t s = line["first_sentence"]; s <= line["last_sentence"].get<std::size_t>(); ++s) covered[s] = 1;
  }
  std::size_t uncovered = 0;
  for (int c : covered) uncovered += c == 0;
  const Json summary = Json::parse(slurp(r.summary));
  const bool ok = r.document.size() >= 3000 && r.route == Route::MapReduce && summary["route"] == "mapreduce" &&
                  !r.result.summary.empty() && uncovered == 0 && capacity_ok && r.result.depth <= 8;
  return {ok, std::to_string(r.document.size()) + " tokens, " + std::to_string(n_sentences) + " sentences, " +
                  std::to_string(chunks0) + " first-level chunks, " + std::to_string(uncovered) +
                  " uncovered sentences, chunks within capacity " + (capacity_ok ? "yes" : "no") + ", depth " +
                  std::to_string(r.result.depth) + ", summary of " + std::to_string(r.result.summary.size()) + " tokens"};
}

// Runs every subcommand into `dir`; the configs live inside it and name their
// inputs by relative path.
void full_pipeline(const fs::path& dir) {
  const Json corpus = {{"train_size", 150}, {"test_size", 30}};
  const Json train = {{"epochs", 3}, {"val_examples", 10}};
  auto cfg = [&](const std::string& name, const std::string& preset, const Json& caches) {
    Json j = config_json(preset, 21, caches);
    j["corpus"] = corpus;
    j["train"] = train;
    return write_json(dir / (name + ".json"), j);
  };
  auto cli = [](std::vector<std::string> args) {
    args.insert(args.begin(), "relkd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream sink;
    std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
    const int code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(saved);
    if (code != 0) {
      std::string line;
      for (const auto& a : args) line += " " + a;
      throw std::runtime_error("command failed:" + line);
    }
  };
  const std::string d = dir.string();
  cli({"--config", cfg("teacher", "TEACHER", Json::object()).string(), "--out", d + "/t1", "distill"});
  cli({"--config", cfg("teacher2", "TEACHER2", Json::object()).string(), "--out", d + "/t2", "distill"});
  cli({"--config", d + "/teacher.json", "--out", d + "/caches", "cache-teacher", "--checkpoint",
       d + "/t1/checkpoint.json", "--id", "t1", "--pseudo", "--score-pseudo"});
  cli({"--config", d + "/teacher2.json", "--out", d + "/caches", "cache-teacher", "--checkpoint",
       d + "/t2/checkpoint.json", "--id", "t2"});
  const Json caches = {{"teacher1", "caches/t1.topk.jsonl"},
                       {"teacher1_pseudo", "caches/t1.pseudo-topk.jsonl"},
                       {"teacher2", "caches/t2.topk.jsonl"},
                       {"pseudo", {"caches/t1.pseudo.jsonl"}},
                       {"hidden_teacher", "t1/checkpoint.json"}};
  for (const std::string arm : {"A1", "A2", "A3", "A4", "A5", "FIXED_WEIGHTS", "CONFIDENCE_ONLY", "AGREEMENT_ONLY",
                                "EWAD", "EWAD_CPDP"}) {
    cli({"--config", cfg(arm, arm, caches).string(), "--out", d + "/" + arm, "distill"});
  }
  cli({"--config", d + "/A5.json", "--out", d + "/eval", "evaluate", "--checkpoint", d + "/A5/checkpoint.json",
       "--teacher", d + "/t1/checkpoint.json"});
  cli({"--config", d + "/teacher.json", "--out", d + "/mapreduce", "--trace", "mapreduce", "--checkpoint",
       d + "/t1/checkpoint.json", "--tokens", "3000"});
  cli({"--config", d + "/EWAD_CPDP.json", "--out", d + "/gate", "gate-trace", "--checkpoint",
       d + "/EWAD_CPDP/checkpoint.json", "--ids", "train-0,train-7,train-42"});
}

Outcome determinism() {
  const fs::path a = workdir() / "det_a";
  const fs::path b = workdir() / "det_b";
  full_pipeline(a);
  const char* prev = std::getenv("REL_KD_THREADS");
  const std::string saved = prev ? prev : "";
  setenv("REL_KD_THREADS", "3", 1);
  full_pipeline(b);
  if (prev) {
    setenv("REL_KD_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("REL_KD_THREADS");
  }

  std::size_t files = 0, jsonl = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++files;
    if (rel.extension() == ".jsonl") ++jsonl;
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  std::string detail = std::to_string(files) + " output files (" + std::to_string(jsonl) +
                       " JSONL) from all five subcommands, second run with REL_KD_THREADS=3; " +
                       std::to_string(differing.size()) + " differ";
  for (const auto& f : differing) detail += " " + f;
  return {differing.empty() && jsonl > 0, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "oracle equivalence", 10, oracle_equivalence},
      {3, "gate calibration constants", 0, gate_constants},
      {4, "adaptive temperature midpoint", 0, adaptive_temperature},
      {5, "CPDP trivial-solution guard", 0, cpdp_guard},
      {6, "invariant suites", 60, invariant_suites},
      {7, "desk-scale direction A2 vs A1", 300, desk_scale_direction},
      {8, "pseudo-label mixing rate", 0, mixing_rate},
      {9, "MapReduce end to end", 0, mapreduce_end_to_end},
      {10, "retention arithmetic", 0, retention_rows},
      {11, "determinism", 0, determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.1f s", secs);
    if (c.budget_s > 0) {
      timing += fmt(" of %.0f s budget", c.budget_s);
      pass = pass && secs < c.budget_s;
    }
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << " [" << timing
              << "]" << std::endl;
  }
  std::cout << (failed == 0 ? "all 11 criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
