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

#include "relkd/config.hpp"

#include <fstream>
#include <set>

namespace relkd {

namespace {

void reject_unknown(const Json& j, const char* block, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DomainError(std::string("config: '") + block + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.count(item.key())) throw DomainError(std::string("config: unknown field '") + block + "." + item.key() + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

const char* task_name(CorpusTask t) { return t == CorpusTask::Copy ? "copy" : "compress"; }

CorpusTask parse_task(const std::string& s) {
  if (s == "compress") return CorpusTask::Compress;
  if (s == "copy") return CorpusTask::Copy;
  throw DomainError("config: unknown corpus task '" + s + "'");
}

Json matrix_json(const Eigen::MatrixXd& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

Eigen::MatrixXd matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw DomainError(std::string("checkpoint: '") + what + "' has " + std::to_string(flat.size()) +
                      " entries, expected " + std::to_string(rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"A1",  "A2",   "A3",  "A4", "A5", "BASELINE", "FIXED_WEIGHTS", "CONFIDENCE_ONLY", "AGREEMENT_ONLY",
          "EWAD", "EWAD_CPDP", "TEACHER", "TEACHER2"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  TrainConfig& t = cfg.train;
  if (name == "A1" || name == "BASELINE") {
    t.mode = LossMode::CE;
  } else if (name == "TEACHER") {
    t.mode = LossMode::CE;
    t.hidden_dim = 24;
  } else if (name == "TEACHER2") {
    t.mode = LossMode::CE;
    t.hidden_dim = 32;
  } else if (name == "A2" || name == "A3" || name == "A4") {
    t.mode = parse_loss_mode(name);
  } else if (name == "A5") {
    t.mode = LossMode::A5;
    t.weights = LossWeights(0.01, 0.1);
  } else if (name == "EWAD") {
    t.mode = LossMode::Ewad;
  } else if (name == "FIXED_WEIGHTS") {
    t.mode = LossMode::Ewad;
    t.ewad_variant = EwadVariant::FixedWeights;
  } else if (name == "CONFIDENCE_ONLY") {
    t.mode = LossMode::Ewad;
    t.ewad_variant = EwadVariant::ConfidenceOnly;
  } else if (name == "AGREEMENT_ONLY") {
    t.mode = LossMode::Ewad;
    t.ewad_variant = EwadVariant::AgreementOnly;
  } else if (name == "EWAD_CPDP") {
    t.mode = LossMode::EwadCpdp;
  } else {
    throw DomainError("config: unknown preset '" + name + "'");
  }
  apply_seed(cfg, 0);
  return cfg;
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.corpus.seed = derive_seed(seed, "corpus");
  cfg.train.seed = seed;
  cfg.train.mixing.seed = derive_seed(seed, "mixing");
}

void ExperimentConfig::validate() const {
  corpus.validate();
  train.validate();
  chunk.validate();
  if (chunk.context_limit != train.context_limit) throw DomainError("config: chunk and train context limits differ");
  if (cache_k == 0 || cache_k > corpus.vocab_size) throw DomainError("config: cache.k must lie in [1, vocab_size]");
  if (beam_width < 1) throw DomainError("config: cache.beam_width must be >= 1");
  if (train.max_summary_len == 0) throw DomainError("config: train.max_summary_len must be >= 1");
  if (train.max_summary_len + 1 > chunk.capacity) {
    throw DomainError("config: generated summaries must fit in one chunk (max_summary_len + 1 <= capacity)");
  }
}

ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, "config",
                 {"version", "preset", "seed", "corpus", "train", "reliability", "adaptive_tau", "mixing", "chunk",
                  "cache", "caches"});
  const int version = j.value("version", kConfigVersion);
  if (version != kConfigVersion) throw DomainError("config: unsupported version " + std::to_string(version));

  ExperimentConfig cfg = preset_config(j.value("preset", std::string("A1")));
  apply_seed(cfg, j.value("seed", std::uint64_t{0}));

  if (j.contains("corpus")) {
    const Json& c = j.at("corpus");
    reject_unknown(c, "corpus",
                   {"task", "vocab_size", "train_size", "test_size", "min_sentences", "max_sentences",
                    "min_sentence_len", "max_sentence_len", "salient_tokens", "salient_rate", "stride", "max_summary"});
    if (c.contains("task")) cfg.corpus.task = parse_task(c.at("task").get<std::string>());
    read(c, "vocab_size", cfg.corpus.vocab_size);
    read(c, "train_size", cfg.corpus.train_size);
    read(c, "test_size", cfg.corpus.test_size);
    read(c, "min_sentences", cfg.corpus.min_sentences);
    read(c, "max_sentences", cfg.corpus.max_sentences);
    read(c, "min_sentence_len", cfg.corpus.min_sentence_len);
    read(c, "max_sentence_len", cfg.corpus.max_sentence_len);
    read(c, "salient_tokens", cfg.corpus.salient_tokens);
    read(c, "salient_rate", cfg.corpus.salient_rate);
    read(c, "stride", cfg.corpus.stride);
    read(c, "max_summary", cfg.corpus.max_summary);
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    reject_unknown(t, "train",
                   {"loss_mode", "ewad_variant", "alpha_kd", "alpha_inter", "mu", "cpdp_clamp", "tau",
                    "learning_rate", "clip_norm", "epochs", "batch_size", "context_limit", "hidden_dim", "teacher_hidden_dim",
                    "init_scale", "calibration_tokens", "val_examples", "max_summary_len"});
    TrainConfig& tc = cfg.train;
    if (t.contains("loss_mode")) tc.mode = parse_loss_mode(t.at("loss_mode").get<std::string>());
    if (t.contains("ewad_variant")) tc.ewad_variant = parse_ewad_variant(t.at("ewad_variant").get<std::string>());
    tc.weights = LossWeights(t.value("alpha_kd", tc.weights.alpha_kd()), t.value("alpha_inter", tc.weights.alpha_inter()),
                             t.value("mu", tc.weights.mu()), t.value("cpdp_clamp", tc.weights.cpdp_clamp()));
    read(t, "tau", tc.tau);
    read(t, "learning_rate", tc.learning_rate);
    read(t, "clip_norm", tc.clip_norm);
    read(t, "epochs", tc.epochs);
    read(t, "batch_size", tc.batch_size);
    read(t, "context_limit", tc.context_limit);
    read(t, "hidden_dim", tc.hidden_dim);
    read(t, "teacher_hidden_dim", tc.teacher_hidden_dim);
    read(t, "init_scale", tc.init_scale);
    read(t, "calibration_tokens", tc.calibration_tokens);
    read(t, "val_examples", tc.val_examples);
    read(t, "max_summary_len", tc.max_summary_len);
  }
  if (j.contains("reliability")) {
    const Json& r = j.at("reliability");
    reject_unknown(r, "reliability", {"gate_steepness", "gate_threshold", "weight_temperature"});
    read(r, "gate_steepness", cfg.train.reliability.gate_steepness);
    read(r, "gate_threshold", cfg.train.reliability.gate_threshold);
    read(r, "weight_temperature", cfg.train.reliability.weight_temperature);
  }
  if (j.contains("adaptive_tau")) {
    const Json& a = j.at("adaptive_tau");
    reject_unknown(a, "adaptive_tau", {"tau_min", "tau_max"});
    read(a, "tau_min", cfg.train.adaptive_tau.tau_min);
    read(a, "tau_max", cfg.train.adaptive_tau.tau_max);
  }
  if (j.contains("mixing")) {
    const Json& m = j.at("mixing");
    reject_unknown(m, "mixing", {"p_pseudo"});
    read(m, "p_pseudo", cfg.train.mixing.p_pseudo);
  }
  cfg.chunk.context_limit = cfg.train.context_limit;
  if (j.contains("chunk")) {
    const Json& c = j.at("chunk");
    reject_unknown(c, "chunk", {"capacity", "overlap", "jaccard_threshold", "max_depth"});
    read(c, "capacity", cfg.chunk.capacity);
    read(c, "overlap", cfg.chunk.overlap);
    read(c, "jaccard_threshold", cfg.chunk.jaccard_threshold);
    read(c, "max_depth", cfg.chunk.max_depth);
  }
  if (j.contains("cache")) {
    const Json& c = j.at("cache");
    reject_unknown(c, "cache", {"k", "beam_width"});
    read(c, "k", cfg.cache_k);
    read(c, "beam_width", cfg.beam_width);
  }
  if (j.contains("caches")) {
    const Json& c = j.at("caches");
    reject_unknown(c, "caches", {"teacher1", "teacher1_pseudo", "teacher2", "pseudo", "hidden_teacher"});
    auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
      if (!c.contains(key) || c.at(key).is_null()) return std::nullopt;
      return resolve(base_dir, c.at(key).get<std::string>());
    };
    cfg.caches.teacher1 = path_of("teacher1");
    cfg.caches.teacher1_pseudo = path_of("teacher1_pseudo");
    cfg.caches.teacher2 = path_of("teacher2");
    cfg.caches.hidden_teacher = path_of("hidden_teacher");
    if (c.contains("pseudo")) {
      for (const auto& p : c.at("pseudo")) cfg.caches.pseudo.push_back(resolve(base_dir, p.get<std::string>()));
    }
  }
  cfg.validate();
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const CorpusConfig& c = cfg.corpus;
  Json j;
  j["version"] = kConfigVersion;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["corpus"] = {{"task", task_name(c.task)},
                 {"vocab_size", c.vocab_size},
                 {"train_size", c.train_size},
                 {"test_size", c.test_size},
                 {"min_sentences", c.min_sentences},
                 {"max_sentences", c.max_sentences},
                 {"min_sentence_len", c.min_sentence_len},
                 {"max_sentence_len", c.max_sentence_len},
                 {"salient_tokens", c.salient_tokens},
                 {"salient_rate", c.salient_rate},
                 {"stride", c.stride},
                 {"max_summary", c.max_summary}};
  j["train"] = {{"loss_mode", loss_mode_name(t.mode)},
                {"ewad_variant", ewad_variant_name(t.ewad_variant)},
                {"alpha_kd", t.weights.alpha_kd()},
                {"alpha_inter", t.weights.alpha_inter()},
                {"mu", t.weights.mu()},
                {"cpdp_clamp", t.weights.cpdp_clamp()},
                {"tau", t.tau},
                {"learning_rate", t.learning_rate},
                {"clip_norm", t.clip_norm},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"context_limit", t.context_limit},
                {"hidden_dim", t.hidden_dim},
                {"teacher_hidden_dim", t.teacher_hidden_dim},
                {"init_scale", t.init_scale},
                {"calibration_tokens", t.calibration_tokens},
                {"val_examples", t.val_examples},
                {"max_summary_len", t.max_summary_len}};
  j["reliability"] = {{"gate_steepness", t.reliability.gate_steepness},
                      {"gate_threshold", t.reliability.gate_threshold},
                      {"weight_temperature", t.reliability.weight_temperature}};
  j["adaptive_tau"] = {{"tau_min", t.adaptive_tau.tau_min}, {"tau_max", t.adaptive_tau.tau_max}};
  j["mixing"] = {{"p_pseudo", t.mixing.p_pseudo}};
  j["chunk"] = {{"capacity", cfg.chunk.capacity},
                {"overlap", cfg.chunk.overlap},
                {"jaccard_threshold", cfg.chunk.jaccard_threshold},
                {"max_depth", cfg.chunk.max_depth}};
  j["cache"] = {{"k", cfg.cache_k}, {"beam_width", cfg.beam_width}};
  Json caches = Json::object();
  auto put = [&](const char* key, const std::optional<std::filesystem::path>& p) {
    if (p) caches[key] = p->string();
  };
  put("teacher1", cfg.caches.teacher1);
  put("teacher1_pseudo", cfg.caches.teacher1_pseudo);
  put("teacher2", cfg.caches.teacher2);
  put("hidden_teacher", cfg.caches.hidden_teacher);
  if (!cfg.caches.pseudo.empty()) {
    Json list = Json::array();
    for (const auto& p : cfg.caches.pseudo) list.push_back(p.string());
    caches["pseudo"] = list;
  }
  j["caches"] = caches;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DomainError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

Json checkpoint_to_json(const Checkpoint& ckpt) {
  const ToyModelParams& p = ckpt.params;
  Json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "toy-model";
  j["preset"] = ckpt.preset;
  j["vocab_size"] = p.vocab_size();
  j["hidden_dim"] = p.hidden_dim();
  j["layout"] = "column-major";
  j["embedding"] = matrix_json(p.embedding);
  j["recurrence"] = matrix_json(p.recurrence);
  j["output"] = matrix_json(p.output);
  if (p.projection) {
    j["projection"] = {{"rows", p.projection->rows()}, {"cols", p.projection->cols()}, {"data", matrix_json(*p.projection)}};
  } else {
    j["projection"] = nullptr;
  }
  j["entropy_running_mean"] = optional_number(ckpt.entropy_running_mean);
  j["delta_star"] = optional_number(ckpt.delta_star);
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  if (j.value("version", 0) != kCheckpointVersion) throw DomainError("checkpoint: unsupported version");
  if (j.value("kind", std::string()) != "toy-model") throw DomainError("checkpoint: not a toy-model checkpoint");
  Checkpoint c;
  c.preset = j.value("preset", std::string());
  const auto v = j.at("vocab_size").get<Eigen::Index>();
  const auto d = j.at("hidden_dim").get<Eigen::Index>();
  c.params.embedding = matrix_from(j.at("embedding"), d, v, "embedding");
  c.params.recurrence = matrix_from(j.at("recurrence"), d, d, "recurrence");
  c.params.output = matrix_from(j.at("output"), v, d, "output");
  if (j.contains("projection") && !j.at("projection").is_null()) {
    const Json& pj = j.at("projection");
    c.params.projection =
        matrix_from(pj.at("data"), pj.at("rows").get<Eigen::Index>(), pj.at("cols").get<Eigen::Index>(), "projection");
  }
  c.entropy_running_mean = read_optional(j, "entropy_running_mean");
  c.delta_star = read_optional(j, "delta_star");
  c.params.validate();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("missing checkpoint: " + path.string());
  try {
    return checkpoint_from_json(Json::parse(in));
  } catch (const std::exception& e) {
    throw DomainError("checkpoint " + path.string() + ": " + e.what());
  }
}

Json epoch_to_json(const EpochMetrics& m) {
  return {{"version", kReportVersion}, {"epoch", m.epoch},        {"loss", m.loss},
          {"ce", m.ce},                {"kd", m.kd},              {"inter", m.inter},
          {"cpdp", m.cpdp},            {"mean_tau", m.mean_tau},  {"pseudo_fraction", m.pseudo_fraction},
          {"val_rougeL", m.val_rougeL}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError("cannot write " + path.string());
  out << text;
  if (!out) throw DomainError("write failed: " + path.string());
}

}  // namespace relkd
