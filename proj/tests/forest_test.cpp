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

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "engage/forest.hpp"
#include "support.hpp"

namespace engage {
namespace {

using testing::gaussian_classes;

Dataset one_dimensional(std::vector<double> x, std::vector<int> y) {
  Dataset d;
  for (std::size_t i = 0; i < x.size(); ++i) d.add_row(std::vector<double>{x[i]}, y[i]);
  return d;
}

Dataset xor_data() {
  Dataset d;
  d.add_row(std::vector<double>{0, 0}, 0);
  d.add_row(std::vector<double>{1, 1}, 0);
  d.add_row(std::vector<double>{0, 1}, 1);
  d.add_row(std::vector<double>{1, 0}, 1);
  return d;
}

std::vector<WeightedRow> unit_rows(const Dataset& d) {
  std::vector<WeightedRow> rows;
  for (std::size_t i = 0; i < d.size(); ++i) rows.push_back({i, 1.0});
  return rows;
}

double training_accuracy(const Tree& t, const Dataset& d) {
  int ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& leaf = t.leaf_for(d.row(i));
    const int pred = leaf.counts[1] >= leaf.counts[0] ? 1 : 0;
    ok += pred == d.labels[i];
  }
  return double(ok) / double(d.size());
}

TrainConfig single_tree(int depth, std::size_t d) {
  TrainConfig c;
  c.n_trees = 1;
  c.max_depth = depth;
  c.min_samples_leaf = 1;
  c.mtry = static_cast<int>(d);
  c.bootstrap = false;
  c.class_weighting = ClassWeighting::kNone;
  return c;
}

std::string serialize(const RandomForestModel& m) {
  std::ostringstream out;
  save_model(m, out);
  return out.str();
}

TEST(Gini, Values) {
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{5, 5}), 0.5);
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{10, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{3, 1}), 0.375);
}

TEST(BestSplit, MidpointBetweenClasses) {
  const auto d = one_dimensional({1, 2, 9, 10}, {0, 0, 1, 1});
  const std::vector<std::size_t> features = {0};
  const auto s = best_split(d, unit_rows(d), features, 1);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0);
  EXPECT_DOUBLE_EQ(s->threshold, 5.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
}

// Brute force over every midpoint of a random 1-D problem.
TEST(BestSplit, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coin(0, 1), value(0, 20);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 12; ++i) {
      x.push_back(value(rng));
      y.push_back(coin(rng));
    }
    const auto d = one_dimensional(x, y);
    auto g = [](double a, double b) {
      const double t = a + b;
      return t > 0 ? 1.0 - (a / t) * (a / t) - (b / t) * (b / t) : 0.0;
    };
    double n1 = std::accumulate(y.begin(), y.end(), 0.0);
    const double parent = g(12 - n1, n1);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    double best = -1, best_thr = 0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double thr = (sorted[i] + sorted[i + 1]) / 2;
      double l[2] = {0, 0}, r[2] = {0, 0};
      for (int k = 0; k < 12; ++k) (x[k] <= thr ? l : r)[y[k]] += 1;
      const double dec = parent - ((l[0] + l[1]) * g(l[0], l[1]) + (r[0] + r[1]) * g(r[0], r[1])) / 12;
      if (dec > best + 1e-12) {
        best = dec;
        best_thr = thr;
      }
    }
    const std::vector<std::size_t> features = {0};
    const auto s = best_split(d, unit_rows(d), features, 1);
    if (parent == 0 || sorted.size() < 2) {
      EXPECT_FALSE(s.has_value());
      continue;
    }
    ASSERT_TRUE(s.has_value());
    EXPECT_NEAR(s->impurity_decrease, best, 1e-12);
    EXPECT_EQ(s->threshold, best_thr);
  }
}

TEST(BestSplit, PureNodeHasNoSplit) {
  const auto d = one_dimensional({1, 2, 3}, {1, 1, 1});
  const std::vector<std::size_t> features = {0};
  EXPECT_FALSE(best_split(d, unit_rows(d), features, 1).has_value());
}

TEST(BestSplit, IdenticalInputsHaveNoSplit) {
  const auto d = one_dimensional({4, 4}, {0, 1});
  const std::vector<std::size_t> features = {0};
  EXPECT_FALSE(best_split(d, unit_rows(d), features, 1).has_value());
}

TEST(GrowTree, SeparableNeedsOneSplit) {
  const auto d = one_dimensional({0.5, 1.5, 2.0, 7.0, 8.0, 9.5}, {0, 0, 0, 1, 1, 1});
  std::mt19937_64 rng(1);
  const auto t = grow_tree(d, unit_rows(d), single_tree(12, 1), rng);
  EXPECT_EQ(t.depth(), 1);
  EXPECT_EQ(training_accuracy(t, d), 1.0);
}

TEST(GrowTree, XorAtDepthTwo) {
  const auto d = xor_data();
  std::mt19937_64 rng(1);
  const auto t = grow_tree(d, unit_rows(d), single_tree(2, 2), rng);
  EXPECT_EQ(training_accuracy(t, d), 1.0);
}

TEST(GrowTree, XorAtDepthOneFails) {
  const auto d = xor_data();
  std::mt19937_64 rng(1);
  const auto t = grow_tree(d, unit_rows(d), single_tree(1, 2), rng);
  EXPECT_LE(training_accuracy(t, d), 0.75);
  TrainConfig bad = single_tree(0, 2);
  EXPECT_THROW(bad.validate(2), ValidationError);
}

TEST(Forest, SameSeedSameBytes) {
  const auto d = gaussian_classes(300, 8, 3, 1);
  TrainConfig c;
  c.n_trees = 20;
  c.seed = 42;
  EXPECT_EQ(serialize(train_forest(d, c)), serialize(train_forest(d, c)));
}

TEST(Forest, ThreadCountDoesNotMatter) {
  const auto d = gaussian_classes(300, 8, 3, 2);
  TrainConfig c;
  c.n_trees = 16;
  c.seed = 9;
  EXPECT_EQ(train_forest(d, c, 1), train_forest(d, c, 4));
}

TEST(Forest, EarlierTreesIgnoreLaterOnes) {
  const auto d = gaussian_classes(200, 6, 2, 3);
  TrainConfig c;
  c.seed = 5;
  c.n_trees = 5;
  const auto small = train_forest(d, c);
  c.n_trees = 12;
  const auto big = train_forest(d, c);
  for (std::size_t i = 0; i < small.trees.size(); ++i) EXPECT_EQ(small.trees[i], big.trees[i]);
}

TEST(Forest, SingleTreeReducesToGrowTree) {
  const auto d = gaussian_classes(200, 6, 2, 4);
  auto c = single_tree(12, 6);
  c.min_samples_leaf = 5;
  const auto model = train_forest(d, c);
  auto rng = substream(c.seed, 0);
  EXPECT_EQ(model.trees.front(), grow_tree(d, unit_rows(d), c, rng));
}

TEST(Forest, LabelSwapSwapsPredictions) {
  auto d = gaussian_classes(300, 6, 2, 6);
  auto swapped = d;
  for (auto& l : swapped.labels) l = 1 - l;
  TrainConfig c;
  c.n_trees = 15;
  c.seed = 3;
  const auto a = train_forest(d, c);
  const auto b = train_forest(swapped, c);
  const auto probe = gaussian_classes(200, 6, 2, 60);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto pa = predict_proba(a, probe.row(i));
    const auto pb = predict_proba(b, probe.row(i));
    EXPECT_EQ(pa[0], pb[1]);
    EXPECT_EQ(pa[1], pb[0]);
    if (pa[0] != pa[1]) EXPECT_EQ(predict(a, probe.row(i)), 1 - predict(b, probe.row(i)));
  }
}

TEST(Forest, FeaturePermutationInvariance) {
  const auto d = gaussian_classes(300, 7, 3, 7);
  const std::vector<std::size_t> perm = {4, 0, 6, 2, 5, 1, 3};
  auto permute = [&](std::span<const double> x) {
    std::vector<double> y(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) y[f] = x[perm[f]];
    return y;
  };
  Dataset p;
  for (std::size_t i = 0; i < d.size(); ++i) p.add_row(permute(d.row(i)), d.labels[i]);
  TrainConfig c;
  c.n_trees = 3;
  c.mtry = 7;
  c.bootstrap = false;
  const auto a = train_forest(d, c);
  const auto b = train_forest(p, c);
  const auto probe = gaussian_classes(300, 7, 3, 70);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    EXPECT_EQ(predict_proba(a, probe.row(i)), predict_proba(b, permute(probe.row(i))));
  }
}

TEST(Forest, DepthAndLeafMassBounds) {
  const auto d = gaussian_classes(400, 10, 3, 8);
  TrainConfig c;
  c.n_trees = 10;
  c.max_depth = 4;
  c.min_samples_leaf = 7;
  for (const auto& t : train_forest(d, c).trees) {
    EXPECT_LE(t.depth(), 4);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) EXPECT_GE(n.counts[0] + n.counts[1], 7.0 - 1e-9);
    }
  }
}

TEST(Forest, SeparableGaussianBenchmark) {
  double mean = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) mean += testing::gaussian_benchmark_f1(seed);
  EXPECT_GE(mean / 3.0, 0.95);
}

TEST(Forest, BalancedWeights) {
  const auto d = one_dimensional({1, 2, 3, 4}, {0, 0, 0, 1});
  const auto w = class_weights(d, ClassWeighting::kBalanced);
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(w[1], 2.0);
  EXPECT_DOUBLE_EQ(3 * w[0], 1 * w[1]);
}

TEST(Forest, SingleClassTraining) {
  const auto d = one_dimensional({1, 2, 3, 4, 5}, {1, 1, 1, 1, 1});
  TrainConfig c;
  c.n_trees = 3;
  const auto m = train_forest(d, c);
  EXPECT_TRUE(m.single_class);
  EXPECT_EQ(predict(m, std::vector<double>{0.0}), kOffTaskClass);
}

RandomForestModel stub_model(std::vector<std::array<double, 2>> leaves) {
  RandomForestModel m;
  m.feature_names = {"f0"};
  m.schema_hash = schema_hash(m.feature_names);
  for (const auto& c : leaves) {
    Tree t;
    TreeNode leaf;
    leaf.counts = c;
    t.nodes.push_back(leaf);
    m.trees.push_back(t);
  }
  m.config.n_trees = static_cast<int>(leaves.size());
  return m;
}

TEST(Predict, PureOffTaskLeaf) {
  const auto p = predict_proba(stub_model({{0, 3}}), std::vector<double>{1.0});
  EXPECT_EQ(p, (std::array<double, 2>{0, 1}));
}

TEST(Predict, TwoTreesAverage) {
  const auto m = stub_model({{2, 0}, {0, 5}});
  EXPECT_EQ(predict_proba(m, std::vector<double>{1.0}), (std::array<double, 2>{0.5, 0.5}));
  EXPECT_EQ(predict(m, std::vector<double>{1.0}), kOffTaskClass);
}

TEST(Predict, ProbabilitiesSumToOne) {
  const auto d = gaussian_classes(300, 5, 2, 9);
  TrainConfig c;
  c.n_trees = 10;
  const auto m = train_forest(d, c);
  const auto probe = gaussian_classes(100, 5, 2, 90);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto p = predict_proba(m, probe.row(i));
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
  }
  EXPECT_THROW(predict_proba(m, std::vector<double>{1.0}), SchemaError);
}

TEST(ModelFile, RoundTrip) {
  auto d = gaussian_classes(300, 5, 2, 10);
  d.feature_names = {"a.median", "b.mad", "c", "d", "e"};
  TrainConfig c;
  c.n_trees = 7;
  c.mtry = 3;
  c.seed = 1234567890123ULL;
  const auto m = train_forest(d, c);
  const auto text = serialize(m);
  std::istringstream in(text);
  const auto back = load_model(in);
  EXPECT_EQ(back, m);
  EXPECT_EQ(serialize(back), text);
  EXPECT_EQ(text.rfind("{\"format_version\":1,\"class_names\":", 0), 0u);
}

TEST(ModelFile, RejectsBadHeaders) {
  auto load = [](const std::string& s) {
    std::istringstream in(s);
    return load_model(in);
  };
  EXPECT_THROW(load("{}"), ValidationError);
  EXPECT_THROW(load("{\"format_version\":99}"), ValidationError);
  EXPECT_THROW(load("not json"), ValidationError);
  const auto d = gaussian_classes(50, 3, 1, 11);
  TrainConfig c;
  c.n_trees = 2;
  auto text = serialize(train_forest(d, c));
  const auto pos = text.find("\"f1\"");
  text.replace(pos, 4, "\"zz\"");
  EXPECT_THROW(load(text), ValidationError);
}

TEST(Schema, MismatchIsRejected) {
  const auto m = stub_model({{1, 1}});
  const std::vector<std::string> other = {"g0"};
  EXPECT_THROW(check_schema(m, other), SchemaError);
  const std::vector<std::string> same = {"f0"};
  EXPECT_NO_THROW(check_schema(m, same));
}

}  // namespace
}  // namespace engage
