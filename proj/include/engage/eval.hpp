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

#pragma once

// Two-class agreement metrics. Class 0 is OnTask, class 1 is OffTask; matrix
// rows are the truth and columns the prediction.

#include <array>
#include <cstdint>
#include <span>

#include "engage/errors.hpp"
#include "engage/ingest.hpp"

namespace engage {

struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 2>, 2> counts{};

  std::int64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  std::int64_t row_sum(int k) const { return counts[k][0] + counts[k][1]; }
  std::int64_t col_sum(int k) const { return counts[0][k] + counts[1][k]; }
  std::int64_t correct() const { return counts[0][0] + counts[1][1]; }

  void add(Label truth, Label pred) { ++counts[static_cast<int>(truth)][static_cast<int>(pred)]; }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> truths) {
  if (preds.size() != truths.size()) {
    throw ValidationError("confusion: predictions and truths differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(truths[i], preds[i]);
  return cm;
}

namespace detail {

inline double safe_ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace detail

// F1 for class k; an empty precision or recall denominator counts as 0.
inline double f1_score(const ConfusionMatrix& cm, int k) {
  const double tp = static_cast<double>(cm.counts[k][k]);
  const double precision = detail::safe_ratio(tp, static_cast<double>(cm.col_sum(k)));
  const double recall = detail::safe_ratio(tp, static_cast<double>(cm.row_sum(k)));
  return detail::safe_ratio(2.0 * precision * recall, precision + recall);
}

struct ClassF1 {
  double on_task = 0;
  double off_task = 0;
};

inline ClassF1 f1_per_class(const ConfusionMatrix& cm) { return {f1_score(cm, 0), f1_score(cm, 1)}; }

struct OverallF1 {
  double weighted = 0;  // by truth support
  double macro = 0;
};

inline OverallF1 overall_f1(const ConfusionMatrix& cm) {
  const auto f = f1_per_class(cm);
  OverallF1 o;
  o.macro = (f.on_task + f.off_task) / 2.0;
  const double n = static_cast<double>(cm.total());
  if (n > 0) {
    o.weighted = (static_cast<double>(cm.row_sum(0)) * f.on_task +
                  static_cast<double>(cm.row_sum(1)) * f.off_task) /
                 n;
  }
  return o;
}

inline double accuracy(const ConfusionMatrix& cm) {
  return detail::safe_ratio(static_cast<double>(cm.correct()), static_cast<double>(cm.total()));
}

// Expected agreement from the marginals: sum_k (row_k / N) (col_k / N).
inline double chance_accuracy(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n <= 0) return 0.0;
  double pe = 0;
  for (int k = 0; k < 2; ++k) {
    pe += (static_cast<double>(cm.row_sum(k)) / n) * (static_cast<double>(cm.col_sum(k)) / n);
  }
  return pe;
}

struct Kappa {
  double value = 0;
  // p_e == 1, where kappa is undefined and reported as 0.
  bool degenerate = false;
};

inline Kappa kappa_from_rates(double p_o, double p_e) {
  if (p_e >= 1.0) return {0.0, true};
  return {(p_o - p_e) / (1.0 - p_e), false};
}

inline Kappa kappa_detail(const ConfusionMatrix& cm) {
  if (cm.total() == 0) return {0.0, true};
  return kappa_from_rates(accuracy(cm), chance_accuracy(cm));
}

inline double cohens_kappa(const ConfusionMatrix& cm) { return kappa_detail(cm).value; }

struct EvalReport {
  ConfusionMatrix confusion;
  double f1_on_task = 0;
  double f1_off_task = 0;
  double overall_f1_weighted = 0;
  double overall_f1_macro = 0;
  double accuracy = 0;
  double chance_accuracy = 0;
  double kappa = 0;
  bool kappa_degenerate = false;
  std::int64_t n_windows = 0;
  std::int64_t n_gate_predictions = 0;
};

inline EvalReport make_report(const ConfusionMatrix& cm, std::int64_t n_gate_predictions = 0) {
  EvalReport r;
  r.confusion = cm;
  const auto f = f1_per_class(cm);
  r.f1_on_task = f.on_task;
  r.f1_off_task = f.off_task;
  const auto o = overall_f1(cm);
  r.overall_f1_weighted = o.weighted;
  r.overall_f1_macro = o.macro;
  r.accuracy = accuracy(cm);
  r.chance_accuracy = chance_accuracy(cm);
  const auto k = kappa_detail(cm);
  r.kappa = k.value;
  r.kappa_degenerate = k.degenerate;
  r.n_windows = cm.total();
  r.n_gate_predictions = n_gate_predictions;
  return r;
}

}  // namespace engage
