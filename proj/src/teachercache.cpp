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

#include "relkd/teachercache.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace relkd {

namespace {

using Json = nlohmann::ordered_json;

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

void check_vocab_id(int token, std::size_t vocab_size, const char* what) {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size) {
    throw DomainError(std::string(what) + ": token id " + std::to_string(token) + " outside vocabulary");
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CacheError("cannot open cache for writing: " + path.string());
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw CacheError("write failed: " + path.string());
}

Json header(const char* kind, std::size_t vocab_size, std::size_t k) {
  Json h;
  h["version"] = kCacheVersion;
  h["kind"] = kind;
  h["vocab_size"] = vocab_size;
  h["k"] = k;
  return h;
}

TopKRecord parse_topk(const Json& j, std::size_t vocab_size) {
  TopKRecord r;
  r.example_id = j.at("id").get<std::string>();
  r.vocab_size = vocab_size;
  for (const auto& pos : j.at("positions")) {
    auto& entries = r.positions.emplace_back();
    for (const auto& pair : pos) {
      if (!pair.is_array() || pair.size() != 2) throw DomainError("expected [token, logprob] pair");
      entries.push_back({pair[0].get<int>(), pair[1].get<double>()});
    }
  }
  return r;
}

PseudoLabelRecord parse_pseudo(const Json& j) {
  PseudoLabelRecord r;
  r.example_id = j.at("id").get<std::string>();
  r.teacher_id = j.at("teacher").get<std::string>();
  r.beam_width = j.at("beam").get<int>();
  r.tokens = j.at("tokens").get<std::vector<int>>();
  r.text = j.at("text").get<std::string>();
  return r;
}

}  // namespace

void TopKRecord::validate(std::size_t k) const {
  if (vocab_size < 2) throw DomainError("TopKRecord " + example_id + ": vocabulary too small");
  for (std::size_t p = 0; p < positions.size(); ++p) {
    const auto& entries = positions[p];
    const std::string at = "TopKRecord " + example_id + " position " + std::to_string(p);
    if (entries.empty()) throw DomainError(at + ": empty entry list");
    if (entries.size() > k) throw DomainError(at + ": more than k entries");
    std::set<int> seen;
    double mass = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      check_vocab_id(entries[i].token, vocab_size, at.c_str());
      if (!seen.insert(entries[i].token).second) throw DomainError(at + ": duplicate token id");
      if (!std::isfinite(entries[i].logprob)) throw DomainError(at + ": non-finite logprob");
      if (i > 0 && entries[i].logprob > entries[i - 1].logprob) {
        throw DomainError(at + ": entries not sorted by descending logprob");
      }
      mass += std::exp(entries[i].logprob);
    }
    if (mass > 1.0 + 1e-6) throw DomainError(at + ": cached mass exceeds 1");
  }
}

void PseudoLabelRecord::validate(std::size_t vocab_size) const {
  if (tokens.empty()) throw DomainError("PseudoLabelRecord " + example_id + ": empty summary");
  if (beam_width < 1) throw DomainError("PseudoLabelRecord " + example_id + ": beam width must be >= 1");
  for (int t : tokens) check_vocab_id(t, vocab_size, "PseudoLabelRecord");
}

std::size_t write_cache(const TopKCache& cache, const std::filesystem::path& path) {
  for (const auto& r : cache.records) {
    if (r.vocab_size != cache.vocab_size) throw DomainError("TopKRecord " + r.example_id + ": vocabulary mismatch");
    r.validate(cache.k);
  }
  std::ofstream out = open_for_write(path);
  out << header("topk", cache.vocab_size, cache.k).dump() << '\n';
  for (const auto& r : cache.records) {
    Json line;
    line["id"] = r.example_id;
    Json positions = Json::array();
    for (const auto& entries : r.positions) {
      Json pos = Json::array();
      for (const auto& e : entries) pos.push_back(Json::array({e.token, e.logprob}));
      positions.push_back(std::move(pos));
    }
    line["positions"] = std::move(positions);
    out << line.dump() << '\n';
  }
  finish_write(out, path);
  return cache.records.size();
}

std::size_t write_cache(const PseudoCache& cache, const std::filesystem::path& path) {
  for (const auto& r : cache.records) r.validate(cache.vocab_size);
  std::ofstream out = open_for_write(path);
  out << header("pseudo", cache.vocab_size, 0).dump() << '\n';
  for (const auto& r : cache.records) {
    Json line;
    line["id"] = r.example_id;
    line["teacher"] = r.teacher_id;
    line["beam"] = r.beam_width;
    line["tokens"] = r.tokens;
    line["text"] = r.text;
    out << line.dump() << '\n';
  }
  finish_write(out, path);
  return cache.records.size();
}

std::variant<TopKCache, PseudoCache> read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open cache: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw CacheError(where(path, 1) + ": missing header line");
  std::string kind;
  std::size_t vocab_size = 0;
  std::size_t k = 0;
  try {
    const Json h = Json::parse(line);
    const int version = h.at("version").get<int>();
    if (version != kCacheVersion) {
      throw CacheError(where(path, 1) + ": unsupported cache version " + std::to_string(version));
    }
    kind = h.at("kind").get<std::string>();
    vocab_size = h.at("vocab_size").get<std::size_t>();
    k = h.at("k").get<std::size_t>();
  } catch (const CacheError&) {
    throw;
  } catch (const std::exception& e) {
    throw CacheError(where(path, 1) + ": malformed header: " + e.what());
  }
  if (kind != "topk" && kind != "pseudo") throw CacheError(where(path, 1) + ": unknown cache kind '" + kind + "'");

  TopKCache topk{vocab_size, k, {}};
  PseudoCache pseudo{vocab_size, {}};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      const Json j = Json::parse(line);
      if (kind == "topk") {
        TopKRecord r = parse_topk(j, vocab_size);
        r.validate(k);
        topk.records.push_back(std::move(r));
      } else {
        PseudoLabelRecord r = parse_pseudo(j);
        r.validate(vocab_size);
        pseudo.records.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      throw CacheError(where(path, lineno) + ": " + e.what());
    }
  }
  if (kind == "topk") return topk;
  return pseudo;
}

TopKCache read_topk_cache(const std::filesystem::path& path) {
  auto cache = read_cache(path);
  if (auto* c = std::get_if<TopKCache>(&cache)) return std::move(*c);
  throw CacheError(path.string() + ": expected a top-k cache");
}

PseudoCache read_pseudo_cache(const std::filesystem::path& path) {
  auto cache = read_cache(path);
  if (auto* c = std::get_if<PseudoCache>(&cache)) return std::move(*c);
  throw CacheError(path.string() + ": expected a pseudo-label cache");
}

TopKRecord make_topk_record(std::string example_id, std::span<const ProbDist> positions, std::size_t k) {
  if (k == 0) throw DomainError("make_topk_record: k must be >= 1");
  TopKRecord r;
  r.example_id = std::move(example_id);
  r.vocab_size = positions.empty() ? 0 : positions.front().size();
  for (const auto& p : positions) {
    require_same_size(p.size(), r.vocab_size, "make_topk_record");
    std::vector<int> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(k, p.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](int a, int b) {
                        const double pa = p[static_cast<std::size_t>(a)];
                        const double pb = p[static_cast<std::size_t>(b)];
                        return pa != pb ? pa > pb : a < b;
                      });
    auto& entries = r.positions.emplace_back();
    for (std::size_t i = 0; i < keep; ++i) {
      const double prob = p[static_cast<std::size_t>(order[i])];
      if (prob <= 0.0) break;
      entries.push_back({order[i], std::log(prob)});
    }
  }
  return r;
}

ProbDist densify(const TopKRecord& record, std::size_t position) {
  if (position >= record.positions.size()) {
    throw DomainError("densify: position " + std::to_string(position) + " out of range for " + record.example_id);
  }
  const auto& entries = record.positions[position];
  if (entries.empty()) throw DomainError("densify: empty entry list in " + record.example_id);
  // Shift by the top log-probability before exponentiating.
  const double top = entries.front().logprob;
  std::vector<double> dense(record.vocab_size, 0.0);
  double mass = 0.0;
  for (const auto& e : entries) {
    check_vocab_id(e.token, record.vocab_size, "densify");
    const double v = std::exp(e.logprob - top);
    dense[static_cast<std::size_t>(e.token)] = v;
    mass += v;
  }
  for (double& v : dense) v /= mass;
  return ProbDist(std::move(dense));
}

void MixingConfig::validate() const {
  if (!(p_pseudo >= 0.0 && p_pseudo <= 1.0)) throw DomainError("MixingConfig: p_pseudo must lie in [0, 1]");
}

TargetChoice sample_target(std::span<const int> gold, std::span<const PseudoLabelRecord> pseudo,
                           const MixingConfig& cfg, std::uint64_t example_index) {
  cfg.validate();
  if (gold.empty()) throw DomainError("sample_target: empty gold target");
  if (cfg.p_pseudo > 0.0 && pseudo.empty()) throw DomainError("sample_target: p_pseudo > 0 but no pseudo-labels");

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(example_index), static_cast<std::uint32_t>(example_index >> 32)};
  std::mt19937_64 rng(seq);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;

  TargetChoice choice;
  if (u < cfg.p_pseudo) {
    const auto& pick = pseudo[static_cast<std::size_t>(rng() % pseudo.size())];
    choice.tokens = pick.tokens;
    choice.pseudo = true;
    choice.teacher_id = pick.teacher_id;
  } else {
    choice.tokens.assign(gold.begin(), gold.end());
  }
  return choice;
}

}  // namespace relkd
