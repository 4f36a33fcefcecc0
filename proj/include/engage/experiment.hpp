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

// Corpus-level pipeline: featurize every window, build training sets,
// predict, score, and run train/test experiments across classroom and
// platform cells.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "engage/corpus.hpp"
#include "engage/errors.hpp"
#include "engage/eval.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/fusion.hpp"
#include "engage/ingest.hpp"
#include "engage/text.hpp"
#include "engage/windowing.hpp"

namespace engage {

// ---------------------------------------------------------------------------
// Feature table
// ---------------------------------------------------------------------------

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<WindowKey> keys;
  std::vector<double> values;  // row-major, keys.size() x names.size()

  std::size_t rows() const { return keys.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * names.size(), names.size());
  }

  bool operator==(const FeatureTable&) const = default;
};

inline void write_feature_table(std::ostream& out, const FeatureTable& t) {
  std::string line = "session_id,index";
  for (const auto& n : t.names) {
    line += ',';
    line += n;
  }
  line += '\n';
  out << line;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    line = t.keys[i].session_id;
    line += ',';
    line += std::to_string(t.keys[i].index);
    for (double v : t.row(i)) {
      line += ',';
      text::append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

inline FeatureTable parse_feature_table(std::istream& in) {
  FeatureTable t;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) throw ParseError("feature table is empty (missing header)");
  const auto header = text::split(line, ',');
  if (header.size() < 3 || text::trim(header[0]) != "session_id" ||
      text::trim(header[1]) != "index") {
    throw ParseError("bad feature table header", row);
  }
  for (std::size_t i = 2; i < header.size(); ++i) t.names.emplace_back(text::trim(header[i]));
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != header.size()) throw ParseError("arity mismatch", row);
    t.keys.push_back({detail::require_session(f[0], row), text::require_int(f[1], "index", row)});
    for (std::size_t i = 2; i < f.size(); ++i) {
      const double v = text::require_double(f[i], t.names[i - 2], row);
      if (!std::isfinite(v)) throw ParseError("non-finite feature value", row);
      t.values.push_back(v);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Corpus featurization
// ---------------------------------------------------------------------------

struct FeaturizedCorpus {
  std::vector<SessionMetadata> sessions;
  std::vector<std::size_t> session_of_window;
  std::vector<Window> windows;
  FeatureTable features;  // row i belongs to windows[i]
};

inline FeaturizedCorpus featurize_corpus(const Corpus& corpus, const WindowConfig& wcfg,
                                         const FeatureSpec& spec) {
  corpus.schema.validate();
  wcfg.validate();
  spec.validate(corpus.schema.sample_rate_hz);
  FeaturizedCorpus out;
  out.features.names = feature_names(corpus.schema, spec);
  for (std::size_t s = 0; s < corpus.sessions.size(); ++s) {
    const auto& tl = corpus.sessions[s];
    out.sessions.push_back(tl.metadata);
    for (auto& w : make_windows(tl, wcfg, corpus.patterns)) {
      const auto values = featurize_values(w, tl, corpus.schema, spec);
      out.features.keys.push_back({w.session_id, w.index});
      out.features.values.insert(out.features.values.end(), values.begin(), values.end());
      out.session_of_window.push_back(s);
      out.windows.push_back(std::move(w));
    }
  }
  return out;
}

// Windows and feature rows must describe the same windows in the same order.
inline void check_aligned(const std::vector<Window>& windows, const FeatureTable& table) {
  if (windows.size() != table.rows()) {
    throw ValidationError("window table has " + std::to_string(windows.size()) +
                          " rows, feature table has " + std::to_string(table.rows()));
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].session_id != table.keys[i].session_id ||
        windows[i].index != table.keys[i].index) {
      throw ValidationError("window/feature key mismatch at row " + std::to_string(i + 1) + ": (" +
                            windows[i].session_id + "," + std::to_string(windows[i].index) +
                            ") vs (" + table.keys[i].session_id + "," +
                            std::to_string(table.keys[i].index) + ")");
    }
  }
}

// Labeled windows among `rows`. Two-phase training leaves out windows the
// context gate would already decide.
inline Dataset make_dataset(const std::vector<Window>& windows, const FeatureTable& table,
                            std::span<const std::size_t> rows, FusionMode mode,
                            double gate_threshold) {
  Dataset d;
  d.n_features = table.names.size();
  d.feature_names = table.names;
  for (std::size_t i : rows) {
    const auto& w = windows[i];
    if (w.truth_label == TruthLabel::kUnlabeled) continue;
    if (mode == FusionMode::kContextAndAppearance && w.platform_coverage < gate_threshold) continue;
    d.features.insert(d.features.end(), table.row(i).begin(), table.row(i).end());
    d.labels.push_back(w.truth_label == TruthLabel::kOnTask ? kOnTaskClass : kOffTaskClass);
    d.group_ids.push_back(w.session_id);
  }
  return d;
}

inline std::vector<Prediction> predict_windows(const TwoPhaseModel& model,
                                               const std::vector<Window>& windows,
                                               const FeatureTable& table,
                                               std::span<const std::size_t> rows) {
  model.validate();
  check_schema(*model.appearance, table.names);
  std::vector<GatedInstance> batch;
  batch.reserve(rows.size());
  for (std::size_t i : rows) {
    batch.push_back({table.keys[i], windows[i].platform_coverage, table.row(i)});
  }
  return predict_batch(model, batch);
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

// Scores predictions against the window table's truth labels, matching rows
// by (session_id, index). Unlabeled windows are skipped. Any key present on
// one side only is a validation error listing the differences.
inline EvalReport evaluate_predictions(const std::vector<Prediction>& preds,
                                       const std::vector<Window>& windows) {
  std::map<WindowKey, const Window*> by_key;
  for (const auto& w : windows) {
    if (!by_key.emplace(WindowKey{w.session_id, w.index}, &w).second) {
      throw ValidationError("duplicate window key (" + w.session_id + "," +
                            std::to_string(w.index) + ")");
    }
  }
  std::set<WindowKey> seen;
  std::vector<std::string> missing_windows;
  ConfusionMatrix cm;
  std::int64_t gated = 0;
  for (const auto& p : preds) {
    if (!seen.insert(p.window_ref).second) {
      throw ValidationError("duplicate prediction key (" + p.window_ref.session_id + "," +
                            std::to_string(p.window_ref.index) + ")");
    }
    const auto it = by_key.find(p.window_ref);
    if (it == by_key.end()) {
      missing_windows.push_back("+ (" + p.window_ref.session_id + "," +
                                std::to_string(p.window_ref.index) + ")");
      continue;
    }
    const auto truth = it->second->truth_label;
    if (truth == TruthLabel::kUnlabeled) continue;
    cm.add(truth == TruthLabel::kOnTask ? Label::kOnTask : Label::kOffTask, p.label);
    if (p.source == PredictionSource::kContextGate) ++gated;
  }
  for (const auto& [key, w] : by_key) {
    if (!seen.contains(key)) {
      missing_windows.push_back("- (" + key.session_id + "," + std::to_string(key.index) + ")");
    }
  }
  if (!missing_windows.empty()) {
    std::string msg = "prediction/window keys differ (+ prediction only, - window only):";
    const std::size_t shown = std::min<std::size_t>(missing_windows.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + missing_windows[i];
    if (shown < missing_windows.size()) {
      msg += "\n  ... " + std::to_string(missing_windows.size() - shown) + " more";
    }
    throw ValidationError(msg);
  }
  return make_report(cm, gated);
}

inline void write_report_csv(std::ostream& out, const EvalReport& r) {
  auto row = [&](std::string_view k, double v) { out << k << ',' << text::format_double(v) << '\n'; };
  out << "metric,value\n";
  row("f1_on_task", r.f1_on_task);
  row("f1_off_task", r.f1_off_task);
  row("overall_f1_weighted", r.overall_f1_weighted);
  row("overall_f1_macro", r.overall_f1_macro);
  row("accuracy", r.accuracy);
  row("chance_accuracy", r.chance_accuracy);
  row("kappa", r.kappa);
  out << "kappa_degenerate," << (r.kappa_degenerate ? 1 : 0) << '\n';
  out << "n_windows," << r.n_windows << '\n';
  out << "n_gate_predictions," << r.n_gate_predictions << '\n';
  out << "tp_on_on," << r.confusion.counts[0][0] << '\n';
  out << "on_predicted_off," << r.confusion.counts[0][1] << '\n';
  out << "off_predicted_on," << r.confusion.counts[1][0] << '\n';
  out << "tp_off_off," << r.confusion.counts[1][1] << '\n';
}

inline std::string render_report(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "windows           " << r.n_windows << " (" << r.n_gate_predictions << " via context gate)\n";
  out << "confusion         truth on_task : " << r.confusion.counts[0][0] << " on, "
      << r.confusion.counts[0][1] << " off\n";
  out << "                  truth off_task: " << r.confusion.counts[1][0] << " on, "
      << r.confusion.counts[1][1] << " off\n";
  out << "F1 On-Task        " << r.f1_on_task << '\n';
  out << "F1 Off-Task       " << r.f1_off_task << '\n';
  out << "F1 Overall (wtd)  " << r.overall_f1_weighted << '\n';
  out << "F1 Overall (mac)  " << r.overall_f1_macro << '\n';
  out << "accuracy          " << r.accuracy << '\n';
  out << "chance accuracy   " << r.chance_accuracy << '\n';
  out << "Cohen's kappa     " << r.kappa << (r.kappa_degenerate ? " (degenerate)" : "") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

// Conjunction of `key=value` constraints over classroom and platform; a value
// may list alternatives separated by '|', and '*' matches anything.
class Selector {
 public:
  static Selector parse(std::string_view expr) {
    Selector s;
    s.text_ = std::string(text::trim(expr));
    if (s.text_.empty()) throw ValidationError("empty selector");
    for (auto clause : text::split(s.text_, ',')) {
      clause = text::trim(clause);
      const auto eq = clause.find('=');
      if (eq == std::string_view::npos) {
        throw ValidationError("selector clause '" + std::string(clause) + "' lacks '='");
      }
      const auto key = text::trim(clause.substr(0, eq));
      if (key != "classroom" && key != "platform") {
        throw ValidationError("selector key must be classroom or platform, got '" +
                              std::string(key) + "'");
      }
      auto& values = s.constraints_[std::string(key)];
      for (auto v : text::split(clause.substr(eq + 1), '|')) {
        v = text::trim(v);
        if (v.empty()) throw ValidationError("empty value in selector '" + s.text_ + "'");
        values.insert(std::string(v));
      }
    }
    return s;
  }

  bool matches(const SessionMetadata& m) const {
    auto ok = [&](const char* key, const std::string& value) {
      const auto it = constraints_.find(key);
      if (it == constraints_.end()) return true;
      return it->second.contains("*") || it->second.contains(value);
    };
    return ok("classroom", m.classroom_id) && ok("platform", m.platform_id);
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
  std::map<std::string, std::set<std::string>> constraints_;
};

struct ExperimentRun {
  std::string name;
  std::string table;  // groups runs into output tables
  std::string train_name;
  std::string test_name;
  Selector train;
  Selector test;
  // Allows train and test to share sessions (in-set evaluation).
  bool self_test = false;
};

struct ExperimentConfig {
  std::vector<ExperimentRun> runs;
  std::vector<FusionMode> modes = {FusionMode::kAppearanceOnly, FusionMode::kContextAndAppearance};
  TrainConfig train;
  FeatureSpec features;
  WindowConfig window;
  std::uint64_t seed = 42;
};

struct RunResult {
  ExperimentRun run;
  std::map<FusionMode, EvalReport> reports;
  std::size_t n_train_sessions = 0;
  std::size_t n_test_sessions = 0;
  bool single_class_training = false;
};

inline TwoPhaseModel train_two_phase(const FeaturizedCorpus& fc, std::span<const std::size_t> rows,
                                     FusionMode mode, const TrainConfig& tcfg,
                                     double gate_threshold, const PlatformPatternSet& patterns,
                                     bool* single_class = nullptr) {
  const auto data = make_dataset(fc.windows, fc.features, rows, mode, gate_threshold);
  if (data.size() == 0) throw ValidationError("training selection contains no labeled windows");
  auto forest = train_forest(data, tcfg);
  if (single_class != nullptr) *single_class = forest.single_class;
  TwoPhaseModel m;
  m.patterns = patterns;
  m.gate_threshold = gate_threshold;
  m.mode = mode;
  m.appearance = std::make_shared<const RandomForestModel>(std::move(forest));
  return m;
}

inline std::vector<RunResult> run_experiment(const FeaturizedCorpus& fc,
                                             const PlatformPatternSet& patterns,
                                             const ExperimentConfig& cfg) {
  if (cfg.runs.empty()) throw ValidationError("experiment has no runs");
  if (cfg.modes.empty()) throw ValidationError("experiment has no modes");
  std::vector<RunResult> results;
  for (const auto& run : cfg.runs) {
    RunResult res;
    res.run = run;
    std::set<std::size_t> train_sessions, test_sessions;
    for (std::size_t s = 0; s < fc.sessions.size(); ++s) {
      if (run.train.matches(fc.sessions[s])) train_sessions.insert(s);
      if (run.test.matches(fc.sessions[s])) test_sessions.insert(s);
    }
    if (train_sessions.empty()) {
      throw ValidationError("run '" + run.name + "': train selector '" + run.train.str() +
                            "' matches no sessions");
    }
    if (test_sessions.empty()) {
      throw ValidationError("run '" + run.name + "': test selector '" + run.test.str() +
                            "' matches no sessions");
    }
    if (!run.self_test) {
      for (auto s : train_sessions) {
        if (test_sessions.contains(s)) {
          throw ValidationError("run '" + run.name +
                                "': train and test share sessions; set self_test to allow");
        }
      }
    }
    res.n_train_sessions = train_sessions.size();
    res.n_test_sessions = test_sessions.size();
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < fc.windows.size(); ++i) {
      if (train_sessions.contains(fc.session_of_window[i])) train_rows.push_back(i);
      if (test_sessions.contains(fc.session_of_window[i])) test_rows.push_back(i);
    }
    auto tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    for (auto mode : cfg.modes) {
      bool single = false;
      const auto model = train_two_phase(fc, train_rows, mode, tcfg,
                                         cfg.window.coverage_threshold, patterns, &single);
      res.single_class_training = res.single_class_training || single;
      const auto preds = predict_windows(model, fc.windows, fc.features, test_rows);
      std::vector<Window> test_windows;
      test_windows.reserve(test_rows.size());
      for (auto i : test_rows) test_windows.push_back(fc.windows[i]);
      res.reports[mode] = evaluate_predictions(preds, test_windows);
    }
    results.push_back(std::move(res));
  }
  return results;
}

// Text tables laid out as Train | Test | Class | Appr | Context + Appr, one
// table per distinct `table` name in run order.
inline std::string render_experiment_tables(const std::vector<RunResult>& results) {
  std::vector<std::string> tables;
  for (const auto& r : results) {
    if (std::find(tables.begin(), tables.end(), r.run.table) == tables.end()) {
      tables.push_back(r.run.table);
    }
  }
  std::size_t wtrain = 5, wtest = 4;
  for (const auto& r : results) {
    wtrain = std::max(wtrain, r.run.train_name.size());
    wtest = std::max(wtest, r.run.test_name.size());
  }
  auto cell = [](const RunResult& r, FusionMode m, int which) -> std::string {
    const auto it = r.reports.find(m);
    if (it == r.reports.end()) return "-";
    const auto& rep = it->second;
    const double v = which == 0 ? rep.f1_on_task : which == 1 ? rep.f1_off_task
                                                              : rep.overall_f1_weighted;
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };
  std::ostringstream out;
  for (const auto& t : tables) {
    out << t << '\n';
    std::ostringstream hdr;
    hdr << std::left << std::setw(static_cast<int>(wtrain)) << "Train" << "  "
        << std::setw(static_cast<int>(wtest)) << "Test" << "  " << std::setw(8) << "Class"
        << "  " << std::setw(4) << "Appr" << "  " << "Context + Appr";
    const std::string rule(hdr.str().size(), '-');
    out << rule << '\n' << hdr.str() << '\n' << rule << '\n';
    bool first = true;
    for (const auto& r : results) {
      if (r.run.table != t) continue;
      if (!first) out << rule << '\n';
      first = false;
      const char* classes[] = {"On-Task", "Off-Task", "Overall"};
      for (int c = 0; c < 3; ++c) {
        out << std::left << std::setw(static_cast<int>(wtrain)) << (c == 0 ? r.run.train_name : "")
            << "  " << std::setw(static_cast<int>(wtest)) << (c == 0 ? r.run.test_name : "")
            << "  " << std::setw(8) << classes[c] << "  " << std::setw(4)
            << cell(r, FusionMode::kAppearanceOnly, c) << "  "
            << cell(r, FusionMode::kContextAndAppearance, c) << '\n';
      }
    }
    out << rule << "\n\n";
  }
  return out.str();
}

inline constexpr std::string_view kExperimentCsvHeader =
    "table,run,train,test,mode,f1_on_task,f1_off_task,overall_f1_weighted,overall_f1_macro,"
    "accuracy,chance_accuracy,kappa,n_windows,n_gate_predictions";

inline void write_experiment_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << kExperimentCsvHeader << '\n';
  for (const auto& r : results) {
    for (const auto& [mode, rep] : r.reports) {
      out << r.run.table << ',' << r.run.name << ',' << r.run.train_name << ','
          << r.run.test_name << ',' << to_string(mode) << ',' << text::format_double(rep.f1_on_task)
          << ',' << text::format_double(rep.f1_off_task) << ','
          << text::format_double(rep.overall_f1_weighted) << ','
          << text::format_double(rep.overall_f1_macro) << ',' << text::format_double(rep.accuracy)
          << ',' << text::format_double(rep.chance_accuracy) << ','
          << text::format_double(rep.kappa) << ',' << rep.n_windows << ','
          << rep.n_gate_predictions << '\n';
    }
  }
}

}  // namespace engage
