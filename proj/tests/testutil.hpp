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

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "relkd/distmath.hpp"

namespace relkd::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return rng_; }

  Logits logits(std::size_t n, double scale = 3.0) {
    Logits z(n);
    for (auto& v : z) v = uniform(-scale, scale);
    return z;
  }

  // Random distribution; with `sparse` some entries are exactly zero.
  std::vector<double> probs(std::size_t n, bool sparse = false) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) {
      v = sparse && coin(0.3) ? 0.0 : std::pow(uniform(0.0, 1.0), 3.0);
      s += v;
    }
    if (s == 0.0) {
      p[0] = 1.0;
      s = 1.0;
    }
    for (auto& v : p) v /= s;
    return p;
  }

  ProbDist dist(std::size_t n, bool sparse = false) { return ProbDist(probs(n, sparse)); }

 private:
  std::mt19937_64 rng_;
};

// Relative error between two flattened gradients.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
  return std::sqrt(diff) / scale;
}

inline std::vector<double> flatten(const std::vector<Logits>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Central differences of f over every coordinate of x.
inline std::vector<double> numeric_grad(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                        double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<Logits> unflatten(const std::vector<double>& flat, std::size_t rows) {
  const std::size_t cols = flat.size() / rows;
  std::vector<Logits> out(rows, Logits(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r][c] = flat[r * cols + c];
  }
  return out;
}

}  // namespace relkd::testing
