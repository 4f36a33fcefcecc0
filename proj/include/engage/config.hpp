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

// INI-style configuration for synthetic corpora, featurization, training and
// experiments. Every section is optional; unknown keys are rejected.
//
//   [window]      window_ms, hop_ms, label_policy, gate_threshold,
//                 min_valid_frame_ratio
//   [features]    families, bands, trim_fraction
//   [forest]      n_trees, max_depth, min_samples_leaf, mtry, bootstrap,
//                 class_weighting, seed
//   [experiment]  seed, modes
//   [run.<name>]  table, train_name, test_name, train, test, self_test
//   [corpus] [dwell] [transitions] [emission.<state>] [channels]  (synth)

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "engage/errors.hpp"
#include "engage/experiment.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/fusion.hpp"
#include "engage/synth.hpp"
#include "engage/text.hpp"
#include "engage/windowing.hpp"

namespace engage::config {

using Tree = boost::property_tree::ptree;

inline Tree parse_ini(std::istream& in) {
  Tree t;
  try {
    boost::property_tree::ini_parser::read_ini(in, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return t;
}

inline Tree load_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_ini(in);
}

namespace detail {

using Handler = std::function<void(std::string_view)>;

inline void visit(const Tree& t, std::string_view section,
                  const std::map<std::string, Handler, std::less<>>& handlers) {
  const auto child = t.get_child_optional(Tree::path_type(std::string(section), '\0'));
  if (!child) return;
  for (const auto& [key, node] : *child) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw ValidationError("config: unknown key '" + key + "' in [" + std::string(section) + "]");
    }
    try {
      it->second(text::trim(node.data()));
    } catch (const ValidationError& e) {
      throw ValidationError("config [" + std::string(section) + "] " + key + ": " + e.what());
    }
  }
}

inline std::int64_t as_int(std::string_view v) {
  std::int64_t out = 0;
  if (!text::parse_int(v, out)) throw ValidationError("expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline std::uint64_t as_uint(std::string_view v) {
  v = text::trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("expected an unsigned integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline double as_double(std::string_view v) {
  double out = 0;
  if (!text::parse_double(v, out)) throw ValidationError("expected a number, got '" + std::string(v) + "'");
  return out;
}

inline bool as_bool(std::string_view v) {
  const auto s = text::to_lower(text::trim(v));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError("expected a boolean, got '" + std::string(v) + "'");
}

template <std::size_t N>
std::array<double, N> as_doubles(std::string_view v) {
  const auto parts = text::split(v, ',');
  if (parts.size() != N) {
    throw ValidationError("expected " + std::to_string(N) + " comma-separated numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = as_double(parts[i]);
  return out;
}

}  // namespace detail

inline void apply_window(const Tree& t, WindowConfig& cfg) {
  detail::visit(t, "window",
                {{"window_ms", [&](auto v) { cfg.window_ms = detail::as_int(v); }},
                 {"hop_ms", [&](auto v) { cfg.hop_ms = detail::as_int(v); }},
                 {"label_policy",
                  [&](auto v) {
                    if (v == "majority") {
                      cfg.label_policy = LabelPolicy::kMajority;
                    } else if (v == "strict") {
                      cfg.label_policy = LabelPolicy::kStrict;
                    } else {
                      throw ValidationError("label_policy must be majority or strict");
                    }
                  }},
                 {"gate_threshold", [&](auto v) { cfg.coverage_threshold = detail::as_double(v); }},
                 {"min_valid_frame_ratio",
                  [&](auto v) { cfg.min_valid_frame_ratio = detail::as_double(v); }}});
  cfg.validate();
}

// bands = 0.1-0.5, 0.5-1, 1-2, 2-4
inline void apply_features(const Tree& t, FeatureSpec& spec) {
  detail::visit(
      t, "features",
      {{"families",
        [&](auto v) {
          spec.families = {false, false, false};
          for (auto f : text::split(v, ',')) {
            f = text::trim(f);
            if (f == "robust_stats") {
              spec.families.robust_stats = true;
            } else if (f == "motion_energy") {
              spec.families.motion_energy = true;
            } else if (f == "spectral") {
              spec.families.spectral = true;
            } else {
              throw ValidationError("unknown feature family '" + std::string(f) + "'");
            }
          }
        }},
       {"bands",
        [&](auto v) {
          spec.bands_hz.clear();
          if (text::trim(v).empty()) return;
          for (auto b : text::split(v, ',')) {
            const auto parts = text::split(text::trim(b), '-');
            if (parts.size() != 2) throw ValidationError("band must be '<low>-<high>'");
            spec.bands_hz.push_back({detail::as_double(parts[0]), detail::as_double(parts[1])});
          }
        }},
       {"trim_fraction", [&](auto v) { spec.trim_fraction = detail::as_double(v); }}});
}

inline void apply_forest(const Tree& t, TrainConfig& cfg) {
  detail::visit(t, "forest",
                {{"n_trees", [&](auto v) { cfg.n_trees = static_cast<int>(detail::as_int(v)); }},
                 {"max_depth", [&](auto v) { cfg.max_depth = static_cast<int>(detail::as_int(v)); }},
                 {"min_samples_leaf",
                  [&](auto v) { cfg.min_samples_leaf = static_cast<int>(detail::as_int(v)); }},
                 {"mtry",
                  [&](auto v) {
                    if (v == "sqrt") {
                      cfg.mtry.reset();
                    } else {
                      cfg.mtry = static_cast<int>(detail::as_int(v));
                    }
                  }},
                 {"bootstrap", [&](auto v) { cfg.bootstrap = detail::as_bool(v); }},
                 {"class_weighting",
                  [&](auto v) {
                    if (v == "balanced") {
                      cfg.class_weighting = ClassWeighting::kBalanced;
                    } else if (v == "none") {
                      cfg.class_weighting = ClassWeighting::kNone;
                    } else {
                      throw ValidationError("class_weighting must be balanced or none");
                    }
                  }},
                 {"seed", [&](auto v) { cfg.seed = detail::as_uint(v); }}});
}

inline std::vector<FusionMode> parse_modes(std::string_view v) {
  std::vector<FusionMode> modes;
  for (auto m : text::split(v, ',')) {
    const auto mode = parse_fusion_mode(text::trim(m));
    if (!mode) throw ValidationError("unknown mode '" + std::string(m) + "'");
    modes.push_back(*mode);
  }
  return modes;
}

inline ExperimentConfig experiment_config(const Tree& t) {
  ExperimentConfig cfg;
  apply_window(t, cfg.window);
  apply_features(t, cfg.features);
  apply_forest(t, cfg.train);
  detail::visit(t, "experiment",
                {{"seed", [&](auto v) { cfg.seed = detail::as_uint(v); }},
                 {"modes", [&](auto v) { cfg.modes = parse_modes(v); }}});
  static const std::set<std::string> kKnown = {"window", "features", "forest", "experiment"};
  for (const auto& [section, node] : t) {
    if (kKnown.contains(section)) continue;
    if (!section.starts_with("run.")) {
      throw ValidationError("config: unknown section [" + section + "]");
    }
    ExperimentRun run;
    run.name = section.substr(4);
    std::optional<Selector> train, test;
    detail::visit(t, section,
                  {{"table", [&](auto v) { run.table = std::string(v); }},
                   {"train_name", [&](auto v) { run.train_name = std::string(v); }},
                   {"test_name", [&](auto v) { run.test_name = std::string(v); }},
                   {"train", [&](auto v) { train = Selector::parse(v); }},
                   {"test", [&](auto v) { test = Selector::parse(v); }},
                   {"self_test", [&](auto v) { run.self_test = detail::as_bool(v); }}});
    if (!train || !test) throw ValidationError("run '" + run.name + "' needs train and test");
    run.train = *train;
    run.test = *test;
    if (run.table.empty()) run.table = "Experiment";
    if (run.train_name.empty()) run.train_name = run.train.str();
    if (run.test_name.empty()) run.test_name = run.test.str();
    cfg.runs.push_back(std::move(run));
  }
  return cfg;
}

// cells = C1:Math, C2:Math, C1:ESL
inline SynthConfig synth_config(const Tree& t) {
  SynthConfig cfg;
  detail::visit(
      t, "corpus",
      {{"seed", [&](auto v) { cfg.seed = detail::as_uint(v); }},
       {"cells",
        [&](auto v) {
          cfg.cells.clear();
          for (auto c : text::split(v, ',')) {
            const auto parts = text::split(text::trim(c), ':');
            if (parts.size() != 2) throw ValidationError("cell must be '<classroom>:<platform>'");
            cfg.cells.push_back({std::string(text::trim(parts[0])), std::string(text::trim(parts[1]))});
          }
        }},
       {"n_sessions", [&](auto v) { cfg.n_sessions = static_cast<int>(detail::as_int(v)); }},
       {"session_duration_ms", [&](auto v) { cfg.session_duration_ms = detail::as_int(v); }},
       {"sample_rate_hz", [&](auto v) { cfg.schema.sample_rate_hz = detail::as_double(v); }},
       {"separability", [&](auto v) { cfg.appearance_separability = detail::as_double(v); }},
       {"informative_fraction", [&](auto v) { cfg.informative_fraction = detail::as_double(v); }},
       {"segment_jitter_sd", [&](auto v) { cfg.segment_jitter_sd = detail::as_double(v); }},
       {"student_shift_sd", [&](auto v) { cfg.student_shift_sd = detail::as_double(v); }},
       {"classroom_shift_sd", [&](auto v) { cfg.classroom_shift_sd = detail::as_double(v); }},
       {"platform_shift_sd", [&](auto v) { cfg.platform_shift_sd = detail::as_double(v); }},
       {"min_dwell_s", [&](auto v) { cfg.min_dwell_s = detail::as_double(v); }},
       {"group_noise_sd", [&](auto v) { cfg.group_noise_sd = detail::as_doubles<6>(v); }}});
  // Per-state sections use the hidden-state tokens as keys / suffixes.
  auto state_key = [](HiddenState s) { return std::string(to_string(s)); };
  std::map<std::string, detail::Handler, std::less<>> dwell, trans;
  for (std::size_t k = 0; k < kHiddenStates; ++k) {
    const auto s = static_cast<HiddenState>(k);
    dwell[state_key(s)] = [&cfg, k](std::string_view v) { cfg.dwell_mean_s[k] = detail::as_double(v); };
    trans[state_key(s)] = [&cfg, k](std::string_view v) {
      cfg.transitions[k] = detail::as_doubles<kHiddenStates>(v);
    };
    auto& em = cfg.emission[k];
    detail::visit(t, "emission." + state_key(s),
                  {{"mean_shift", [&](auto v) { em.mean_shift = detail::as_double(v); }},
                   {"noise_scale", [&](auto v) { em.noise_scale = detail::as_double(v); }},
                   {"osc_hz", [&](auto v) { em.osc_hz = detail::as_double(v); }},
                   {"osc_amp", [&](auto v) { em.osc_amp = detail::as_double(v); }},
                   {"face_drop_prob", [&](auto v) { em.face_drop_prob = detail::as_double(v); }}});
  }
  detail::visit(t, "dwell", dwell);
  detail::visit(t, "transitions", trans);
  for (const auto& [section, node] : t) {
    if (section != "corpus" && section != "dwell" && section != "transitions" &&
        !section.starts_with("emission.")) {
      throw ValidationError("config: unknown section [" + section + "] in synth config");
    }
    if (section.starts_with("emission.") && !parse_hidden_state(section.substr(9))) {
      throw ValidationError("config: unknown state in [" + section + "]");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace engage::config
