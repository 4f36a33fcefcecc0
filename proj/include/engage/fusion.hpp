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

// Two-phase decision rule. Windows whose platform coverage falls below the
// gate threshold are Off-Task outright; the rest go to the appearance forest.

#include <array>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engage/errors.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/ingest.hpp"
#include "engage/text.hpp"

namespace engage {

enum class FusionMode { kContextAndAppearance, kAppearanceOnly };

inline std::string_view to_string(FusionMode m) {
  return m == FusionMode::kContextAndAppearance ? "two-phase" : "appearance";
}

inline std::optional<FusionMode> parse_fusion_mode(std::string_view s) {
  if (s == "two-phase" || s == "context_and_appearance") return FusionMode::kContextAndAppearance;
  if (s == "appearance" || s == "appearance_only") return FusionMode::kAppearanceOnly;
  return std::nullopt;
}

enum class PredictionSource { kContextGate, kAppearanceModel };

inline std::string_view to_string(PredictionSource s) {
  return s == PredictionSource::kContextGate ? "context_gate" : "appearance_model";
}

inline std::optional<PredictionSource> parse_prediction_source(std::string_view s) {
  if (s == "context_gate") return PredictionSource::kContextGate;
  if (s == "appearance_model") return PredictionSource::kAppearanceModel;
  return std::nullopt;
}

struct TwoPhaseModel {
  PlatformPatternSet patterns;
  double gate_threshold = 0.5;
  std::shared_ptr<const RandomForestModel> appearance;
  FusionMode mode = FusionMode::kContextAndAppearance;

  void validate() const {
    if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0)) {
      throw ValidationError("gate threshold must lie in [0, 1]");
    }
    if (!appearance) throw ValidationError("two-phase model has no appearance model");
    patterns.validate();
  }
};

struct Prediction {
  WindowKey window_ref;
  Label label = Label::kOffTask;
  PredictionSource source = PredictionSource::kAppearanceModel;
  double proba_offtask = 1.0;

  bool operator==(const Prediction&) const = default;
};

inline Prediction predict_two_phase(const TwoPhaseModel& model, std::span<const double> features,
                                    double platform_coverage, WindowKey key = {}) {
  Prediction p;
  p.window_ref = std::move(key);
  if (model.mode == FusionMode::kContextAndAppearance &&
      platform_coverage < model.gate_threshold) {
    p.label = Label::kOffTask;
    p.source = PredictionSource::kContextGate;
    p.proba_offtask = 1.0;
    return p;
  }
  const auto proba = predict_proba(*model.appearance, features);
  p.source = PredictionSource::kAppearanceModel;
  p.proba_offtask = proba[1];
  p.label = proba[1] >= proba[0] ? Label::kOffTask : Label::kOnTask;
  return p;
}

// Checks the vector's feature names against the model before predicting.
inline Prediction predict_two_phase(const TwoPhaseModel& model, const FeatureVector& features,
                                    double platform_coverage) {
  if (features.names) check_schema(*model.appearance, *features.names);
  return predict_two_phase(model, features.values, platform_coverage, features.window_ref);
}

struct GatedInstance {
  WindowKey key;
  double platform_coverage = 0.0;
  std::span<const double> features;
};

inline std::vector<Prediction> predict_batch(const TwoPhaseModel& model,
                                             std::span<const GatedInstance> batch) {
  std::vector<Prediction> out;
  out.reserve(batch.size());
  for (const auto& g : batch) {
    out.push_back(predict_two_phase(model, g.features, g.platform_coverage, g.key));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPredictionsHeader =
    "session_id,index,label,source,proba_offtask";

inline void write_predictions(std::ostream& out, std::span<const Prediction> preds) {
  out << kPredictionsHeader << '\n';
  std::string line;
  for (const auto& p : preds) {
    line = p.window_ref.session_id;
    line += ',';
    line += std::to_string(p.window_ref.index);
    line += ',';
    line += to_string(p.label);
    line += ',';
    line += to_string(p.source);
    line += ',';
    text::append_double(line, p.proba_offtask);
    line += '\n';
    out << line;
  }
}

inline std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) throw ParseError("predictions file is empty (missing header)");
  detail::expect_header(line, kPredictionsHeader, row);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 5) throw ParseError("expected 5 fields", row);
    Prediction p;
    p.window_ref.session_id = detail::require_session(f[0], row);
    p.window_ref.index = text::require_int(f[1], "index", row);
    const auto label = parse_label(text::trim(f[2]));
    if (!label) throw ParseError("unknown label '" + std::string(f[2]) + "'", row);
    p.label = *label;
    const auto source = parse_prediction_source(text::trim(f[3]));
    if (!source) throw ParseError("unknown source '" + std::string(f[3]) + "'", row);
    p.source = *source;
    p.proba_offtask = text::require_double(f[4], "proba_offtask", row);
    if (!(p.proba_offtask >= 0.0 && p.proba_offtask <= 1.0)) {
      throw ParseError("proba_offtask outside [0, 1]", row);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace engage
