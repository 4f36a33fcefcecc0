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

// engage: command-line entry point.
//
//   engage synth      --config synth.ini --out corpus/
//   engage featurize  --corpus corpus/ --out feat/
//   engage train      --features feat/features.csv --windows feat/windows.csv --out model/
//   engage predict    --model model/model.json --features ... --windows ... --out pred/
//   engage evaluate   --predictions pred/predictions.csv --windows feat/windows.csv
//   engage experiment --config experiment.ini --corpus corpus/ --out exp/
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "engage/engage.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::int64_t> window_ms;
  std::optional<std::int64_t> hop_ms;
  std::optional<double> gate_threshold;
};

engage::config::Tree load_config(const Common& c) {
  if (c.config.empty()) return {};
  return engage::config::load_ini(c.config);
}

engage::WindowConfig window_config(const Common& c, const engage::config::Tree& t) {
  engage::WindowConfig w;
  engage::config::apply_window(t, w);
  if (c.window_ms) w.window_ms = *c.window_ms;
  if (c.hop_ms) w.hop_ms = *c.hop_ms;
  if (c.gate_threshold) w.coverage_threshold = *c.gate_threshold;
  w.validate();
  return w;
}

engage::FusionMode fusion_mode(const Common& c) {
  if (!c.mode) return engage::FusionMode::kContextAndAppearance;
  const auto m = engage::parse_fusion_mode(*c.mode);
  if (!m) throw engage::ValidationError("--mode must be appearance or two-phase");
  return *m;
}

void make_out_dir(const std::string& dir) {
  if (dir.empty()) throw engage::ValidationError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw engage::IoError("cannot create '" + dir + "': " + ec.message());
}

template <typename F>
void write_text(const fs::path& p, F&& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw engage::IoError("cannot open '" + p.string() + "' for writing");
  body(out);
  if (!out) throw engage::IoError("write failed for '" + p.string() + "'");
}

std::ifstream open_in(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw engage::IoError("cannot open '" + p + "' for reading");
  return in;
}

template <typename F>
auto parse_file(const std::string& p, F&& parse) {
  auto in = open_in(p);
  try {
    return parse(in);
  } catch (const engage::ValidationError& e) {
    throw engage::ValidationError(p + ": " + e.what());
  }
}

// Written next to every output so the run can be repeated.
class RunManifest {
 public:
  RunManifest(std::string command, int argc, char** argv)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["tool_version"] = ENGAGE_VERSION;
  }

  void set(const std::string& key, nlohmann::ordered_json value) { j_[key] = std::move(value); }
  void input(const std::string& key, const std::string& path) { j_["inputs"][key] = path; }
  void output(const std::string& path) { j_["outputs"].push_back(path); }

  void write(const std::string& dir) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j_["wall_time_s"] = wall;
    write_text(fs::path(dir) / "run_manifest.json",
               [&](std::ostream& o) { o << j_.dump(2) << '\n'; });
  }

 private:
  std::chrono::steady_clock::time_point start_;
  nlohmann::ordered_json j_;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode, bool with_window) {
  cmd->add_option("--config", c.config, "INI configuration file");
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--seed", c.seed, "Random seed (overrides config)");
  if (with_mode) cmd->add_option("--mode", c.mode, "appearance | two-phase");
  if (with_window) {
    cmd->add_option("--window-ms", c.window_ms, "Window length in ms");
    cmd->add_option("--hop-ms", c.hop_ms, "Window hop in ms");
  }
  cmd->add_option("--gate-threshold", c.gate_threshold, "Platform coverage gate threshold");
}

int cmd_synth(const Common& c, int argc, char** argv) {
  auto cfg = engage::config::synth_config(load_config(c));
  if (c.seed) cfg.seed = *c.seed;
  make_out_dir(c.out);
  RunManifest m("synth", argc, argv);
  m.set("config", c.config);
  m.set("seed", cfg.seed);
  const auto corpus = engage::generate_corpus(cfg);
  engage::write_corpus(c.out, corpus);
  for (auto f : {"schema.txt", "platforms.txt", "manifest.csv", "truth_states.csv"}) {
    m.output((fs::path(c.out) / f).string());
  }
  m.write(c.out);
  std::cerr << "wrote " << corpus.sessions.size() << " sessions to " << c.out << '\n';
  return 0;
}

int cmd_featurize(const Common& c, const std::string& corpus_dir, int argc, char** argv) {
  const auto tree = load_config(c);
  const auto wcfg = window_config(c, tree);
  engage::FeatureSpec spec;
  engage::config::apply_features(tree, spec);
  const auto corpus = engage::load_corpus(corpus_dir);
  const auto fc = engage::featurize_corpus(corpus, wcfg, spec);
  make_out_dir(c.out);
  RunManifest m("featurize", argc, argv);
  m.set("config", c.config);
  m.input("corpus", corpus_dir);
  const auto features = (fs::path(c.out) / "features.csv").string();
  const auto windows = (fs::path(c.out) / "windows.csv").string();
  write_text(features, [&](std::ostream& o) { engage::write_feature_table(o, fc.features); });
  write_text(windows, [&](std::ostream& o) { engage::write_windows(o, fc.windows); });
  m.output(features);
  m.output(windows);
  m.write(c.out);
  std::cerr << "featurized " << fc.windows.size() << " windows x " << fc.features.names.size()
            << " features\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& features_path, const std::string& windows_path,
              int argc, char** argv) {
  const auto tree = load_config(c);
  const auto wcfg = window_config(c, tree);
  engage::TrainConfig tcfg;
  tcfg.seed = 42;
  engage::config::apply_forest(tree, tcfg);
  if (c.seed) tcfg.seed = *c.seed;
  const auto mode = fusion_mode(c);
  const auto table = parse_file(features_path, engage::parse_feature_table);
  const auto windows = parse_file(windows_path, [&](std::istream& in) {
    return engage::parse_windows(in, wcfg.window_ms);
  });
  engage::check_aligned(windows, table);
  const auto rows = engage::all_rows(windows.size());
  const auto data = engage::make_dataset(windows, table, rows, mode, wcfg.coverage_threshold);
  if (data.size() == 0) throw engage::ValidationError("no labeled windows to train on");
  const auto model = engage::train_forest(data, tcfg);
  if (model.single_class) {
    std::cerr << "warning: training data holds a single class; the model always predicts it\n";
  }
  make_out_dir(c.out);
  RunManifest m("train", argc, argv);
  m.set("config", c.config);
  m.set("seed", tcfg.seed);
  m.set("mode", std::string(engage::to_string(mode)));
  m.input("features", features_path);
  m.input("windows", windows_path);
  const auto out = (fs::path(c.out) / "model.json").string();
  write_text(out, [&](std::ostream& o) { engage::save_model(model, o); });
  m.output(out);
  m.write(c.out);
  std::cerr << "trained " << model.trees.size() << " trees on " << data.size() << " windows\n";
  return 0;
}

int cmd_predict(const Common& c, const std::string& model_path, const std::string& features_path,
                const std::string& windows_path, int argc, char** argv) {
  const auto tree = load_config(c);
  const auto wcfg = window_config(c, tree);
  auto forest = parse_file(model_path, engage::load_model);
  const auto table = parse_file(features_path, engage::parse_feature_table);
  const auto windows = parse_file(windows_path, [&](std::istream& in) {
    return engage::parse_windows(in, wcfg.window_ms);
  });
  engage::check_aligned(windows, table);
  engage::TwoPhaseModel model;
  model.gate_threshold = wcfg.coverage_threshold;
  model.mode = fusion_mode(c);
  model.appearance = std::make_shared<const engage::RandomForestModel>(std::move(forest));
  const auto preds =
      engage::predict_windows(model, windows, table, engage::all_rows(windows.size()));
  make_out_dir(c.out);
  RunManifest m("predict", argc, argv);
  m.set("mode", std::string(engage::to_string(model.mode)));
  m.set("gate_threshold", model.gate_threshold);
  m.input("model", model_path);
  m.input("features", features_path);
  m.input("windows", windows_path);
  const auto out = (fs::path(c.out) / "predictions.csv").string();
  write_text(out, [&](std::ostream& o) { engage::write_predictions(o, preds); });
  m.output(out);
  m.write(c.out);
  return 0;
}

int cmd_evaluate(const std::string& out_dir, const std::string& preds_path,
                 const std::string& windows_path, int argc, char** argv) {
  const auto preds = parse_file(preds_path, engage::parse_predictions);
  const auto windows =
      parse_file(windows_path, [](std::istream& in) { return engage::parse_windows(in); });
  const auto report = engage::evaluate_predictions(preds, windows);
  std::cout << engage::render_report(report);
  if (!out_dir.empty()) {
    make_out_dir(out_dir);
    RunManifest m("evaluate", argc, argv);
    m.input("predictions", preds_path);
    m.input("windows", windows_path);
    const auto out = (fs::path(out_dir) / "report.csv").string();
    write_text(out, [&](std::ostream& o) { engage::write_report_csv(o, report); });
    m.output(out);
    m.write(out_dir);
  }
  return 0;
}

int cmd_experiment(const Common& c, const std::string& corpus_dir, int argc, char** argv) {
  if (c.config.empty()) throw engage::ValidationError("experiment needs --config");
  const auto tree = load_config(c);
  auto cfg = engage::config::experiment_config(tree);
  cfg.window = window_config(c, tree);
  if (c.seed) cfg.seed = *c.seed;
  if (c.mode) cfg.modes = {fusion_mode(c)};
  const auto corpus = engage::load_corpus(corpus_dir);
  const auto fc = engage::featurize_corpus(corpus, cfg.window, cfg.features);
  const auto results = engage::run_experiment(fc, corpus.patterns, cfg);
  for (const auto& r : results) {
    if (r.single_class_training) {
      std::cerr << "warning: run '" << r.run.name << "' trained on a single class\n";
    }
  }
  const auto tables = engage::render_experiment_tables(results);
  std::cout << tables;
  make_out_dir(c.out);
  RunManifest m("experiment", argc, argv);
  m.set("config", c.config);
  m.set("seed", cfg.seed);
  m.input("corpus", corpus_dir);
  const auto txt = (fs::path(c.out) / "tables.txt").string();
  const auto csv = (fs::path(c.out) / "results.csv").string();
  write_text(txt, [&](std::ostream& o) { o << tables; });
  write_text(csv, [&](std::ostream& o) { engage::write_experiment_csv(o, results); });
  m.output(txt);
  m.output(csv);
  m.write(c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral engagement detection from URL logs and appearance features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ENGAGE_VERSION);

  Common common;
  std::string corpus_dir, features, windows, model, predictions, eval_out;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, common, false, false);

  auto* featurize = app.add_subcommand("featurize", "Window and featurize a corpus");
  add_common(featurize, common, false, true);
  featurize->add_option("--corpus", corpus_dir, "Corpus directory")->required();

  auto* train = app.add_subcommand("train", "Train the appearance forest");
  add_common(train, common, true, true);
  train->add_option("--features", features, "Feature table CSV")->required();
  train->add_option("--windows", windows, "Window table CSV")->required();

  auto* predict = app.add_subcommand("predict", "Predict with the two-phase rule");
  add_common(predict, common, true, true);
  predict->add_option("--model", model, "Model JSON")->required();
  predict->add_option("--features", features, "Feature table CSV")->required();
  predict->add_option("--windows", windows, "Window table CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against window labels");
  evaluate->add_option("--predictions", predictions, "Predictions CSV")->required();
  evaluate->add_option("--windows", windows, "Window table CSV")->required();
  evaluate->add_option("--out", eval_out, "Directory for report.csv");

  auto* experiment = app.add_subcommand("experiment", "Run train/test experiments");
  add_common(experiment, common, true, true);
  experiment->add_option("--corpus", corpus_dir, "Corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, argc, argv);
    if (featurize->parsed()) return cmd_featurize(common, corpus_dir, argc, argv);
    if (train->parsed()) return cmd_train(common, features, windows, argc, argv);
    if (predict->parsed()) return cmd_predict(common, model, features, windows, argc, argv);
    if (evaluate->parsed()) return cmd_evaluate(eval_out, predictions, windows, argc, argv);
    if (experiment->parsed()) return cmd_experiment(common, corpus_dir, argc, argv);
  } catch (const engage::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const engage::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
