/*
 * Copyright 2026 The Engage Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ENGAGE_TESTS_SUPPORT_HPP_
#define ENGAGE_TESTS_SUPPORT_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "engage/eval.hpp"
#include "engage/forest.hpp"
#include "engage/synth.hpp"

namespace engage::testing {

// Two Gaussian classes: unit variance everywhere, class means -1 / +1 on the
// first `informative` dimensions and 0 elsewhere.
inline Dataset gaussian_classes(std::size_t n, std::size_t d, std::size_t informative,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset data;
  data.n_features = d;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    for (std::size_t f = 0; f < d; ++f) {
      x[f] = g(rng) + (f < informative ? (label == 1 ? 1.0 : -1.0) : 0.0);
    }
    data.add_row(x, label);
  }
  return data;
}

// Rows [begin, end) of `data`.
inline Dataset slice(const Dataset& data, std::size_t begin, std::size_t end) {
  Dataset out;
  out.n_features = data.n_features;
  for (std::size_t i = begin; i < end; ++i) out.add_row(data.row(i), data.labels[i]);
  return out;
}

inline ConfusionMatrix score(const RandomForestModel& model, const Dataset& test) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < test.size(); ++i) {
    cm.add(static_cast<Label>(test.labels[i]), static_cast<Label>(predict(model, test.row(i))));
  }
  return cm;
}

// Held-out weighted F1 on the separable benchmark: n rows, 3:1 train/test.
inline double gaussian_benchmark_f1(std::uint64_t seed, std::size_t n = 2000, std::size_t d = 20,
                                    std::size_t informative = 5) {
  const auto all = gaussian_classes(n, d, informative, seed);
  const std::size_t cut = n * 3 / 4;
  TrainConfig cfg;
  cfg.seed = seed;
  const auto model = train_forest(slice(all, 0, cut), cfg);
  return overall_f1(score(model, slice(all, cut, n))).weighted;
}

// 18 channels from the default schema (face, head, first landmarks, one
// expression, one emotion), one Math cell, five-minute sessions.
inline ChannelSchema small_schema() {
  const auto full = default_schema();
  ChannelSchema s;
  for (std::size_t i = 0; i < 16; ++i) s.entries.push_back(full.entries[i]);
  s.entries.push_back(full.entries[83]);
  s.entries.push_back(full.entries[105]);
  return s;
}

inline SynthConfig small_config(std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.schema = small_schema();
  cfg.cells = {{"C1", "Math"}};
  cfg.n_sessions = 1;
  cfg.session_duration_ms = 300'000;
  cfg.seed = seed;
  return cfg;
}

}  // namespace engage::testing

#endif  // ENGAGE_TESTS_SUPPORT_HPP_
