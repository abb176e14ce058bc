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

#include <fstream>

#include "relkd/config.hpp"
#include "testutil.hpp"

using namespace relkd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("relkd_test_config_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("every preset is a complete valid experiment") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const ExperimentConfig cfg = preset_config(name);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.preset == name);
  }
  CHECK_THROWS_AS(preset_config("A9"), DomainError);
}

TEST_CASE("preset wiring") {
  CHECK(preset_config("A1").train.mode == LossMode::CE);
  CHECK(preset_config("BASELINE").train.mode == LossMode::CE);
  CHECK(preset_config("A2").train.mode == LossMode::A2);
  CHECK(preset_config("A5").train.weights.alpha_inter() == doctest::Approx(0.1));
  CHECK(preset_config("A5").train.weights.alpha_hard() == doctest::Approx(0.89));
  CHECK(preset_config("FIXED_WEIGHTS").train.ewad_variant == EwadVariant::FixedWeights);
  CHECK(preset_config("CONFIDENCE_ONLY").train.ewad_variant == EwadVariant::ConfidenceOnly);
  CHECK(preset_config("AGREEMENT_ONLY").train.ewad_variant == EwadVariant::AgreementOnly);
  CHECK(preset_config("EWAD").train.ewad_variant == EwadVariant::Full);
  CHECK(preset_config("EWAD_CPDP").train.mode == LossMode::EwadCpdp);
  CHECK(preset_config("TEACHER").train.hidden_dim == 24);
  CHECK(preset_config("TEACHER2").train.hidden_dim == 32);

  const ExperimentConfig a2 = preset_config("A2");
  CHECK(a2.train.tau == 0.8);
  CHECK(a2.train.weights.alpha_kd() == 0.01);
  CHECK(a2.train.weights.mu() == 0.05);
  CHECK(a2.train.reliability.gate_steepness == 5.0);
  CHECK(a2.train.reliability.gate_threshold == 0.5);
  CHECK(a2.train.adaptive_tau.tau_min == 0.5);
  CHECK(a2.train.adaptive_tau.tau_max == 2.0);
  CHECK(a2.train.mixing.p_pseudo == 0.3);
  CHECK(a2.chunk.jaccard_threshold == 0.75);
  CHECK(a2.chunk.context_limit == 64);
  CHECK(a2.train.clip_norm == 1.0);
}

TEST_CASE("seeds split per consumer") {
  ExperimentConfig a = preset_config("A2");
  ExperimentConfig b = preset_config("A1");
  apply_seed(a, 7);
  apply_seed(b, 7);
  CHECK(a.corpus.seed == b.corpus.seed);
  CHECK(a.train.mixing.seed == b.train.mixing.seed);
  CHECK(a.corpus.seed != a.train.mixing.seed);
  apply_seed(b, 8);
  CHECK(a.corpus.seed != b.corpus.seed);
}

TEST_CASE("config json round trip") {
  ExperimentConfig cfg = preset_config("EWAD_CPDP");
  apply_seed(cfg, 42);
  cfg.train.epochs = 3;
  cfg.corpus.task = CorpusTask::Copy;
  cfg.chunk.overlap = 1;
  cfg.caches.teacher1 = "/abs/t1.topk.jsonl";
  cfg.caches.pseudo = {"/abs/p.jsonl"};
  const Json j = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.seed == 42);
  CHECK(back.train.mode == LossMode::EwadCpdp);
  CHECK(back.corpus.seed == cfg.corpus.seed);
  CHECK(back.caches.pseudo.size() == 1);
  CHECK(!back.caches.teacher2);
}

TEST_CASE("explicit fields override the preset") {
  const Json j = Json::parse(R"({"version":1,"preset":"A2","train":{"alpha_kd":0.2,"epochs":5},
                                 "mixing":{"p_pseudo":0.5},"chunk":{"overlap":0}})");
  const ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.train.mode == LossMode::A2);
  CHECK(cfg.train.weights.alpha_kd() == 0.2);
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.train.mixing.p_pseudo == 0.5);
  CHECK(cfg.chunk.overlap == 0);
  CHECK(cfg.train.tau == 0.8);
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"version":2})")), doctest::Contains("version 2"), DomainError);
  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"trian":{}})")), doctest::Contains("trian"), DomainError);
  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"train":{"alhpa_kd":0.1}})")),
                       doctest::Contains("train.alhpa_kd"), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"train":{"alpha_kd":0.7,"alpha_inter":0.4}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"adaptive_tau":{"tau_min":2,"tau_max":1}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"mixing":{"p_pseudo":1.5}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"chunk":{"capacity":100}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"chunk":{"capacity":10}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"cache":{"k":0}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"cache":{"k":65}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"corpus":{"task":"translate"}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"preset":"nope"})")), DomainError);
}

TEST_CASE("relative cache paths resolve against the config file") {
  const fs::path dir = scratch("paths");
  {
    std::ofstream out(dir / "run.json");
    out << R"({"version":1,"preset":"A2","caches":{"teacher1":"caches/t1.topk.jsonl","pseudo":["/x/p.jsonl"]}})";
  }
  const ExperimentConfig cfg = load_config(dir / "run.json");
  REQUIRE(cfg.caches.teacher1);
  CHECK(*cfg.caches.teacher1 == dir / "caches/t1.topk.jsonl");
  CHECK(cfg.caches.pseudo.front() == fs::path("/x/p.jsonl"));
  CHECK_THROWS_AS(load_config(dir / "missing.json"), DomainError);
  {
    std::ofstream out(dir / "bad.json");
    out << "{not json";
  }
  CHECK_THROWS_AS(load_config(dir / "bad.json"), DomainError);
}

TEST_CASE("checkpoint round trip is exact") {
  const fs::path dir = scratch("ckpt");
  Checkpoint c{ToyModelParams::random(9, 4, 3, 0.7), 1.25, std::nullopt, "A4"};
  c.params.projection = Eigen::MatrixXd::Random(6, 4);
  save_checkpoint(c, dir / "c.json");
  const Checkpoint back = load_checkpoint(dir / "c.json");
  CHECK(back.params.embedding == c.params.embedding);
  CHECK(back.params.recurrence == c.params.recurrence);
  CHECK(back.params.output == c.params.output);
  REQUIRE(back.params.projection);
  CHECK(*back.params.projection == *c.params.projection);
  CHECK(back.entropy_running_mean == 1.25);
  CHECK(!back.delta_star);
  CHECK(back.preset == "A4");

  Json j = checkpoint_to_json(c);
  j["output"].erase(j["output"].begin());
  CHECK_THROWS_AS(checkpoint_from_json(j), DomainError);
  j = checkpoint_to_json(c);
  j["version"] = 5;
  CHECK_THROWS_AS(checkpoint_from_json(j), DomainError);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.json"), DomainError);
}
