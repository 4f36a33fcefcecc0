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

// Random forest of CART trees: Gini impurity, bootstrap bagging, per-split
// feature subsampling, seeded per-tree random streams, JSON model files.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "engage/errors.hpp"
#include "engage/text.hpp"

namespace engage {

inline constexpr int kOnTaskClass = 0;
inline constexpr int kOffTaskClass = 1;
inline constexpr int kModelFormatVersion = 1;

// Independent generator for stream `stream_id` under `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, n x n_features
  std::vector<int> labels;       // 0 = OnTask, 1 = OffTask
  std::vector<std::string> feature_names;
  std::vector<std::string> group_ids;

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_features, n_features);
  }

  double at(std::size_t i, std::size_t f) const { return features[i * n_features + f]; }

  void add_row(std::span<const double> x, int label, std::string group = {}) {
    if (n_features == 0 && labels.empty()) n_features = x.size();
    if (x.size() != n_features) throw SchemaError("dataset: row width mismatch");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
    group_ids.push_back(std::move(group));
  }

  void validate() const {
    if (labels.empty()) throw ValidationError("dataset is empty");
    if (n_features == 0) throw ValidationError("dataset has no features");
    if (features.size() != labels.size() * n_features) {
      throw ValidationError("dataset: feature matrix shape does not match labels");
    }
    if (!feature_names.empty() && feature_names.size() != n_features) {
      throw ValidationError("dataset: feature_names length differs from width");
    }
    for (int l : labels) {
      if (l != kOnTaskClass && l != kOffTaskClass) throw ValidationError("dataset: label not in {0,1}");
    }
    for (double v : features) {
      if (std::isnan(v)) throw ValidationError("dataset contains NaN");
    }
  }
};

enum class ClassWeighting { kNone, kBalanced };

struct TrainConfig {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 5;
  // nullopt means floor(sqrt(d)), at least 1.
  std::optional<int> mtry;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  ClassWeighting class_weighting = ClassWeighting::kBalanced;

  std::size_t resolved_mtry(std::size_t d) const {
    if (mtry) return static_cast<std::size_t>(*mtry);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  }

  void validate(std::size_t d) const {
    if (n_trees < 1) throw ValidationError("n_trees must be >= 1");
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
    if (mtry && (*mtry < 1 || static_cast<std::size_t>(*mtry) > d)) {
      throw ValidationError("mtry must lie in [1, " + std::to_string(d) + "]");
    }
  }

  bool operator==(const TrainConfig&) const = default;
};

// Leaf iff feature < 0. Internal nodes send x[feature] <= threshold left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, 2> counts{};  // class-weighted training mass

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const {
    const TreeNode* n = &nodes.front();
    while (!n->is_leaf()) {
      n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold
                                              ? n->left
                                              : n->right)];
    }
    return *n;
  }

  int depth() const { return depth_from(0); }

  bool operator==(const Tree&) const = default;

 private:
  int depth_from(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct RandomForestModel {
  int format_version = kModelFormatVersion;
  std::vector<std::string> class_names = {"on_task", "off_task"};
  std::vector<std::string> feature_names;
  std::string schema_hash;
  TrainConfig config;
  // Training data held a single class; every prediction is that class.
  bool single_class = false;
  std::vector<Tree> trees;

  std::size_t n_features() const { return feature_names.size(); }
  bool operator==(const RandomForestModel&) const = default;
};

inline std::string schema_hash(std::span<const std::string> names) {
  std::string joined;
  for (const auto& n : names) {
    joined += n;
    joined += '\n';
  }
  return text::fnv1a_hex(joined);
}

// 1 - sum_k p_k^2; zero for an empty node.
inline double gini(std::span<const double> class_counts) {
  double total = 0;
  for (double c : class_counts) total += c;
  if (total <= 0) return 0.0;
  double sq = 0;
  for (double c : class_counts) sq += (c / total) * (c / total);
  return 1.0 - sq;
}

namespace detail {

// Binary Gini as 2ab/t^2: symmetric in the two classes bit-for-bit.
inline double gini2(double a, double b) {
  const double t = a + b;
  return t > 0 ? 2.0 * a * b / (t * t) : 0.0;
}

inline constexpr double kMassEps = 1e-9;
inline constexpr double kMinDecrease = 1e-12;

}  // namespace detail

// A training row and its mass (bootstrap multiplicity times class weight).
struct WeightedRow {
  std::size_t index = 0;
  double weight = 1.0;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

// Exhaustive scan over midpoints between consecutive distinct values of each
// feature in `feature_subset`. Each child must keep at least
// `min_samples_leaf` mass. Equal decreases go to the lower threshold, then the
// lower feature index, so column order only matters for identical columns.
// A split that leaves impurity unchanged is still admissible, so
// XOR-like structure can be reached one level down. Returns nullopt when no
// admissible split exists.
inline std::optional<Split> best_split(const Dataset& data, std::span<const WeightedRow> rows,
                                       std::span<const std::size_t> feature_subset,
                                       double min_samples_leaf) {
  std::array<double, 2> parent{};
  for (const auto& r : rows) parent[static_cast<std::size_t>(data.labels[r.index])] += r.weight;
  const double total = parent[0] + parent[1];
  const double parent_gini = detail::gini2(parent[0], parent[1]);
  if (parent_gini <= 0.0 || total < 2.0 * min_samples_leaf - detail::kMassEps) return std::nullopt;

  std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());
  std::sort(features.begin(), features.end());

  struct Entry {
    double x;
    double weight;
    int label;
  };
  std::vector<Entry> buf(rows.size());
  std::optional<Split> best;
  for (std::size_t f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      buf[i] = {data.at(rows[i].index, f), rows[i].weight, data.labels[rows[i].index]};
    }
    std::sort(buf.begin(), buf.end(), [](const Entry& a, const Entry& b) { return a.x < b.x; });
    std::array<double, 2> left{};
    for (std::size_t i = 0; i + 1 < buf.size(); ++i) {
      left[static_cast<std::size_t>(buf[i].label)] += buf[i].weight;
      if (!(buf[i].x < buf[i + 1].x)) continue;
      const double wl = left[0] + left[1];
      const double wr = total - wl;
      if (wl < min_samples_leaf - detail::kMassEps || wr < min_samples_leaf - detail::kMassEps) {
        continue;
      }
      const double gl = detail::gini2(left[0], left[1]);
      const double gr = detail::gini2(parent[0] - left[0], parent[1] - left[1]);
      const double decrease = parent_gini - (wl * gl + wr * gr) / total;
      if (decrease < -detail::kMinDecrease) continue;
      double thr = buf[i].x + (buf[i + 1].x - buf[i].x) / 2.0;
      if (!(thr < buf[i + 1].x)) thr = buf[i].x;
      if (!best || decrease > best->impurity_decrease ||
          (decrease == best->impurity_decrease && thr < best->threshold)) {
        best = Split{static_cast<int>(f), thr, decrease};
      }
    }
  }
  return best;
}

namespace detail {

class TreeGrower {
 public:
  TreeGrower(const Dataset& data, const TrainConfig& cfg, std::mt19937_64& rng)
      : data_(data), cfg_(cfg), rng_(rng), mtry_(cfg.resolved_mtry(data.n_features)) {
    perm_.resize(data.n_features);
    for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
  }

  Tree grow(std::vector<WeightedRow> rows) {
    Tree t;
    build(t, rows, 0);
    return t;
  }

 private:
  int build(Tree& t, std::span<WeightedRow> rows, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    std::array<double, 2> counts{};
    for (const auto& r : rows) counts[static_cast<std::size_t>(data_.labels[r.index])] += r.weight;
    t.nodes[static_cast<std::size_t>(id)].counts = counts;

    const double msl = cfg_.min_samples_leaf;
    const bool pure = counts[0] <= 0.0 || counts[1] <= 0.0;
    if (depth >= cfg_.max_depth || pure || counts[0] + counts[1] < 2.0 * msl - kMassEps) return id;

    const auto split = best_split(data_, rows, sample_features(), msl);
    if (!split) return id;
    const auto f = static_cast<std::size_t>(split->feature);
    auto mid = std::stable_partition(rows.begin(), rows.end(), [&](const WeightedRow& r) {
      return data_.at(r.index, f) <= split->threshold;
    });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());
    const int left = build(t, rows.subspan(0, n_left), depth + 1);
    const int right = build(t, rows.subspan(n_left), depth + 1);
    auto& node = t.nodes[static_cast<std::size_t>(id)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  std::span<const std::size_t> sample_features() {
    const std::size_t d = perm_.size();
    for (std::size_t i = 0; i < mtry_ && i + 1 < d; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(perm_[i], perm_[pick(rng_)]);
    }
    return std::span<const std::size_t>(perm_).subspan(0, mtry_);
  }

  const Dataset& data_;
  const TrainConfig& cfg_;
  std::mt19937_64& rng_;
  std::size_t mtry_;
  std::vector<std::size_t> perm_;
};

}  // namespace detail

// Recursive CART on the given rows; a fresh feature subset is drawn from
// `rng` at every split.
inline Tree grow_tree(const Dataset& data, std::vector<WeightedRow> rows, const TrainConfig& cfg,
                      std::mt19937_64& rng) {
  cfg.validate(data.n_features);
  detail::TreeGrower grower(data, cfg, rng);
  return grower.grow(std::move(rows));
}

// Per-class weights: n / (2 n_k) when balanced, otherwise 1.
inline std::array<double, 2> class_weights(const Dataset& data, ClassWeighting w) {
  std::array<double, 2> out{1.0, 1.0};
  if (w == ClassWeighting::kNone) return out;
  std::array<double, 2> n{};
  for (int l : data.labels) n[static_cast<std::size_t>(l)] += 1.0;
  const double total = static_cast<double>(data.size());
  for (std::size_t k = 0; k < 2; ++k) {
    if (n[k] > 0) out[k] = total / (2.0 * n[k]);
  }
  return out;
}

// Tree i draws from substream(cfg.seed, i), so results do not depend on how
// many threads grow trees or on how many trees follow it.
inline RandomForestModel train_forest(const Dataset& data, const TrainConfig& cfg,
                                      unsigned threads = 0) {
  data.validate();
  cfg.validate(data.n_features);
  RandomForestModel model;
  model.config = cfg;
  if (data.feature_names.empty()) {
    for (std::size_t f = 0; f < data.n_features; ++f) {
      model.feature_names.push_back("f" + std::to_string(f));
    }
  } else {
    model.feature_names = data.feature_names;
  }
  model.schema_hash = schema_hash(model.feature_names);
  const auto n_on = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 0));
  model.single_class = n_on == 0 || n_on == data.size();

  const auto cw = class_weights(data, cfg.class_weighting);
  const std::size_t n = data.size();
  auto grow_one = [&](std::size_t i) {
    auto rng = substream(cfg.seed, i);
    std::vector<WeightedRow> rows;
    if (cfg.bootstrap) {
      std::vector<std::uint32_t> mult(n, 0);
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (std::size_t k = 0; k < n; ++k) ++mult[draw(rng)];
      for (std::size_t r = 0; r < n; ++r) {
        if (mult[r] > 0) rows.push_back({r, mult[r] * cw[static_cast<std::size_t>(data.labels[r])]});
      }
    } else {
      rows.reserve(n);
      for (std::size_t r = 0; r < n; ++r) rows.push_back({r, cw[static_cast<std::size_t>(data.labels[r])]});
    }
    return grow_tree(data, std::move(rows), cfg, rng);
  };

  const auto n_trees = static_cast<std::size_t>(cfg.n_trees);
  model.trees.resize(n_trees);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trees));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_trees; ++i) model.trees[i] = grow_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n_trees; i = next++) model.trees[i] = grow_one(i);
      });
    }
  }
  return model;
}

inline void check_schema(const RandomForestModel& model, std::span<const std::string> names) {
  if (names.size() != model.n_features() || schema_hash(names) != model.schema_hash) {
    throw SchemaError("feature names do not match the model schema (model has " +
                      std::to_string(model.n_features()) + " features, input has " +
                      std::to_string(names.size()) + ")");
  }
}

// Mean of the per-tree leaf class distributions.
inline std::array<double, 2> predict_proba(const RandomForestModel& model,
                                           std::span<const double> x) {
  if (x.size() != model.n_features()) {
    throw SchemaError("model expects " + std::to_string(model.n_features()) +
                      " features, got " + std::to_string(x.size()));
  }
  if (model.trees.empty()) throw ValidationError("model has no trees");
  std::array<double, 2> p{};
  for (const auto& t : model.trees) {
    const auto& leaf = t.leaf_for(x);
    const double total = leaf.counts[0] + leaf.counts[1];
    p[0] += leaf.counts[0] / total;
    p[1] += leaf.counts[1] / total;
  }
  const double sum = p[0] + p[1];
  p[0] /= sum;
  p[1] /= sum;
  return p;
}

// Exact ties go to OffTask.
inline int predict(const RandomForestModel& model, std::span<const double> x) {
  const auto p = predict_proba(model, x);
  return p[1] >= p[0] ? kOffTaskClass : kOnTaskClass;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson node_to_json(const Tree& t, int i) {
  const auto& n = t.nodes[static_cast<std::size_t>(i)];
  ojson j;
  if (n.is_leaf()) {
    j["counts"] = {n.counts[0], n.counts[1]};
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["counts"] = {n.counts[0], n.counts[1]};
    j["left"] = node_to_json(t, n.left);
    j["right"] = node_to_json(t, n.right);
  }
  return j;
}

inline int node_from_json(const ojson& j, Tree& t, std::size_t n_features) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  TreeNode node;
  const auto& counts = j.at("counts");
  node.counts = {counts.at(0).get<double>(), counts.at(1).get<double>()};
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
      throw ValidationError("model: node feature index out of range");
    }
    node.threshold = j.at("threshold").get<double>();
    node.left = node_from_json(j.at("left"), t, n_features);
    node.right = node_from_json(j.at("right"), t, n_features);
  } else if (!(node.counts[0] + node.counts[1] > 0)) {
    throw ValidationError("model: leaf with empty counts");
  }
  t.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace detail

// Canonical field order: identical models serialize to identical bytes.
inline void save_model(const RandomForestModel& model, std::ostream& out) {
  detail::ojson j;
  j["format_version"] = model.format_version;
  j["class_names"] = model.class_names;
  j["feature_names"] = model.feature_names;
  j["schema_hash"] = model.schema_hash;
  detail::ojson cfg;
  cfg["n_trees"] = model.config.n_trees;
  cfg["max_depth"] = model.config.max_depth;
  cfg["min_samples_leaf"] = model.config.min_samples_leaf;
  if (model.config.mtry) {
    cfg["mtry"] = *model.config.mtry;
  } else {
    cfg["mtry"] = "sqrt";
  }
  cfg["bootstrap"] = model.config.bootstrap;
  cfg["seed"] = model.config.seed;
  cfg["class_weighting"] =
      model.config.class_weighting == ClassWeighting::kBalanced ? "balanced" : "none";
  j["config"] = cfg;
  j["single_class"] = model.single_class;
  auto& trees = j["trees"] = detail::ojson::array();
  for (const auto& t : model.trees) trees.push_back(detail::node_to_json(t, 0));
  out << j.dump() << '\n';
}

inline RandomForestModel load_model(std::istream& in) {
  detail::ojson j;
  try {
    j = detail::ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: unreadable header, no format_version (") +
                          e.what() + ")");
  }
  if (!j.is_object() || !j.contains("format_version") ||
      !j["format_version"].is_number_integer()) {
    throw ValidationError("model: missing format_version");
  }
  RandomForestModel m;
  m.format_version = j["format_version"].get<int>();
  if (m.format_version != kModelFormatVersion) {
    throw ValidationError("model: unsupported format_version " +
                          std::to_string(m.format_version));
  }
  try {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.schema_hash = j.at("schema_hash").get<std::string>();
    const auto& cfg = j.at("config");
    m.config.n_trees = cfg.at("n_trees").get<int>();
    m.config.max_depth = cfg.at("max_depth").get<int>();
    m.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
    if (cfg.at("mtry").is_string()) {
      if (cfg["mtry"].get<std::string>() != "sqrt") throw ValidationError("model: bad mtry");
      m.config.mtry.reset();
    } else {
      m.config.mtry = cfg.at("mtry").get<int>();
    }
    m.config.bootstrap = cfg.at("bootstrap").get<bool>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    const auto cw = cfg.at("class_weighting").get<std::string>();
    if (cw == "balanced") {
      m.config.class_weighting = ClassWeighting::kBalanced;
    } else if (cw == "none") {
      m.config.class_weighting = ClassWeighting::kNone;
    } else {
      throw ValidationError("model: bad class_weighting '" + cw + "'");
    }
    m.single_class = j.at("single_class").get<bool>();
    for (const auto& tj : j.at("trees")) {
      Tree t;
      detail::node_from_json(tj, t, m.feature_names.size());
      m.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: malformed body (") + e.what() + ")");
  }
  if (m.class_names.size() != 2) throw ValidationError("model: expected two class names");
  if (m.schema_hash != schema_hash(m.feature_names)) {
    throw ValidationError("model: schema_hash does not match feature_names");
  }
  if (m.trees.size() != static_cast<std::size_t>(m.config.n_trees)) {
    throw ValidationError("model: tree count differs from config.n_trees");
  }
  return m;
}

}  // namespace engage
