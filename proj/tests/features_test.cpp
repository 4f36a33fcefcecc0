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

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <set>

#include "engage/features.hpp"
#include "oracles.hpp"

namespace engage {
namespace {

using oracle::reference_dft;
using oracle::reference_median;
using oracle::reference_percentile;

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

TEST(Impute, LinearMidpoint) {
  const auto r = impute({{1, 99, 3}, {true, false, true}, 1.0});
  EXPECT_EQ(r.values, (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(r.all_invalid);
}

TEST(Impute, EdgeFill) {
  const auto r = impute({{0, 0, 5}, {false, false, true}, 1.0});
  EXPECT_EQ(r.values, (std::vector<double>{5, 5, 5}));
}

TEST(Impute, AllInvalid) {
  const auto r = impute({{4, 5, 6}, {false, false, false}, 1.0});
  EXPECT_EQ(r.values, (std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(r.all_invalid);
}

TEST(Impute, LengthAndValidValuesPreserved) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 40);
    std::vector<bool> mask(40);
    for (std::size_t i = 0; i < 40; ++i) mask[i] = rng() % 3 != 0;
    const auto r = impute({x, mask, 0.1});
    ASSERT_EQ(r.values.size(), x.size());
    for (std::size_t i = 0; i < 40; ++i) {
      if (mask[i]) EXPECT_EQ(r.values[i], x[i]);
    }
  }
}

TEST(RobustStats, OddMedian) { EXPECT_EQ(robust_stats(std::vector<double>{1, 2, 3, 4, 100}).median, 3); }

TEST(RobustStats, ConstantSeries) {
  const std::vector<double> x(37, 2.7);
  const auto s = robust_stats(x);
  EXPECT_EQ(s.mad, 0.0);
  EXPECT_EQ(s.iqr, 0.0);
  EXPECT_EQ(s.range, 0.0);
  EXPECT_EQ(s.trimmed_mean, 2.7);
  EXPECT_EQ(s.median, 2.7);
}

TEST(RobustStats, DecilesOfOneToTen) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto s = robust_stats(x);
  EXPECT_DOUBLE_EQ(s.p10, reference_percentile(x, 0.1));
  EXPECT_DOUBLE_EQ(s.p90, reference_percentile(x, 0.9));
  EXPECT_DOUBLE_EQ(s.p10, 1.9);
  EXPECT_DOUBLE_EQ(s.p90, 9.1);
}

TEST(RobustStats, MatchesSortOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 150;
    const auto x = random_vector(rng, n, 3.0);
    const auto s = robust_stats(x, 0.1);
    const double med = reference_median(x);
    std::vector<double> dev;
    for (double v : x) dev.push_back(std::abs(v - med));
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = std::size_t(0.1 * double(n));
    double tm = 0;
    for (std::size_t i = k; i < n - k; ++i) tm += sorted[i];
    tm /= double(n - 2 * k);
    EXPECT_NEAR(s.median, med, 1e-12);
    EXPECT_NEAR(s.mad, reference_median(dev), 1e-12);
    EXPECT_NEAR(s.iqr, reference_percentile(x, 0.75) - reference_percentile(x, 0.25), 1e-12);
    EXPECT_NEAR(s.p10, reference_percentile(x, 0.1), 1e-12);
    EXPECT_NEAR(s.p90, reference_percentile(x, 0.9), 1e-12);
    EXPECT_NEAR(s.trimmed_mean, tm, 1e-12);
    EXPECT_EQ(s.min, sorted.front());
    EXPECT_EQ(s.max, sorted.back());
    EXPECT_EQ(s.range, sorted.back() - sorted.front());
  }
}

TEST(Motion, AlternatingEnergy) {
  EXPECT_DOUBLE_EQ(motion_energy(std::vector<double>{1, -1, 1, -1}, 1.0).signal_energy, 4.0);
}

TEST(Motion, ConstantSeriesIsStill) {
  const auto m = motion_energy(std::vector<double>(30, -4.25), 0.1);
  EXPECT_EQ(m.mean_abs_vel, 0.0);
  EXPECT_EQ(m.max_abs_vel, 0.0);
  EXPECT_EQ(m.mean_abs_acc, 0.0);
  EXPECT_EQ(m.signal_energy, 0.0);
  EXPECT_EQ(m.zero_crossing_rate, 0.0);
}

TEST(Motion, Ramp) {
  const auto m = motion_energy(std::vector<double>{0, 1, 2, 3}, 0.5);
  EXPECT_DOUBLE_EQ(m.mean_abs_vel, 2.0);
  EXPECT_DOUBLE_EQ(m.max_abs_vel, 2.0);
  EXPECT_DOUBLE_EQ(m.mean_abs_acc, 0.0);
}

TEST(Motion, ZeroCrossingsPerSecond) {
  // Mean-removed [1,-1,1,-1] crosses three times over 4 samples of 0.25 s.
  EXPECT_DOUBLE_EQ(motion_energy(std::vector<double>{1, -1, 1, -1}, 0.25).zero_crossing_rate, 3.0);
}

TEST(Dft, ConstantIsDcOnly) {
  const auto X = dft(std::vector<double>(8, 1.5));
  EXPECT_NEAR(std::abs(X[0]), 12.0, 1e-9);
  for (std::size_t k = 1; k < X.size(); ++k) EXPECT_NEAR(std::abs(X[k]), 0.0, 1e-9);
}

TEST(Dft, CosineLandsInItsBin) {
  std::vector<double> x(16);
  for (std::size_t n = 0; n < 16; ++n) x[n] = std::cos(2 * std::numbers::pi * 2 * double(n) / 16);
  const auto X = dft(x);
  EXPECT_NEAR(std::abs(X[2]), 8.0, 1e-9);
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (k != 2) EXPECT_NEAR(std::abs(X[k]), 0.0, 1e-9);
  }
}

TEST(Dft, MatchesDefinitionAndParseval) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {16u, 120u, 128u, 17u}) {
    for (int trial = 0; trial < 34; ++trial) {
      const auto x = random_vector(rng, n);
      const auto X = dft(x);
      const auto ref = reference_dft(x);
      ASSERT_EQ(X.size(), n / 2 + 1);
      for (std::size_t k = 0; k < X.size(); ++k) {
        EXPECT_NEAR(std::abs(X[k] - ref[k]), 0.0, 1e-9 * double(n));
      }
      double time_energy = 0, freq_energy = 0;
      for (double v : x) time_energy += v * v;
      for (const auto& c : ref) freq_energy += std::norm(c);
      freq_energy /= double(n);
      EXPECT_NEAR(freq_energy / time_energy, 1.0, 1e-9);
      double power = 0;
      for (double p : one_sided_power(X, n)) power += p;
      EXPECT_NEAR(power / (time_energy / double(n)), 1.0, 1e-9);
    }
  }
}

TEST(Dft, BatchEqualsSingle) {
  std::mt19937_64 rng(8);
  const std::size_t n = 120, channels = 7;
  const auto x = random_vector(rng, n * channels);
  std::vector<double> re, im;
  DftPlan plan(n);
  plan.forward_batch(x, channels, re, im);
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = x[i * channels + c];
    const auto X = plan.forward(col);
    for (std::size_t k = 0; k < X.size(); ++k) {
      EXPECT_EQ(re[k * channels + c], X[k].real());
      EXPECT_EQ(im[k * channels + c], X[k].imag());
    }
  }
}

const std::vector<FrequencyBand> kBands = {{0.1, 0.5}, {0.5, 1.0}, {1.0, 2.0}, {2.0, 4.0}};

TEST(Spectral, TwoHertzSine) {
  std::vector<double> x(128);
  for (std::size_t n = 0; n < 128; ++n) x[n] = std::sin(2 * std::numbers::pi * 2.0 * double(n) / 16.0);
  const auto f = spectral_features(x, 1.0 / 16.0, kBands);
  EXPECT_EQ(f.dominant_freq_hz, 2.0);
  EXPECT_NEAR(f.band_power[3], f.total_band_power, 1e-12);
  EXPECT_NEAR(f.total_band_power, 0.5, 1e-12);
}

TEST(Spectral, ZeroSeries) {
  const auto f = spectral_features(std::vector<double>(64, 0.0), 0.1, kBands);
  EXPECT_EQ(f.dominant_freq_hz, 0.0);
  EXPECT_EQ(f.spectral_entropy, 0.0);
  EXPECT_EQ(f.total_band_power, 0.0);
  for (double b : f.band_power) EXPECT_EQ(b, 0.0);
}

// Normalised white-noise bin powers are close to a flat Dirichlet draw, whose
// expected Shannon entropy is H_M - 1 (harmonic number).
TEST(Spectral, WhiteNoiseEntropy) {
  const std::size_t n = 128, bins = n / 2;
  double harmonic = 0;
  for (std::size_t k = 1; k <= bins; ++k) harmonic += 1.0 / double(k);
  const double expected = harmonic - 1.0;
  double mean = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    mean += spectral_features(random_vector(rng, n), 1.0 / 16.0, kBands).spectral_entropy;
  }
  mean /= 100.0;
  EXPECT_NEAR(mean / expected, 1.0, 0.05);
  EXPECT_LT(mean, std::log(double(bins)));
}

TEST(Invariance, ShiftLeavesSpreadAndMotionAlone) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 120);
    auto y = x;
    const double c = 3.5;
    for (auto& v : y) v += c;
    const auto a = robust_stats(x), b = robust_stats(y);
    EXPECT_NEAR(b.median, a.median + c, 1e-12);
    EXPECT_NEAR(b.trimmed_mean, a.trimmed_mean + c, 1e-12);
    EXPECT_NEAR(b.mad, a.mad, 1e-12);
    EXPECT_NEAR(b.iqr, a.iqr, 1e-12);
    EXPECT_NEAR(b.range, a.range, 1e-12);
    const auto ma = motion_energy(x, 1.0 / 15), mb = motion_energy(y, 1.0 / 15);
    EXPECT_NEAR(mb.mean_abs_vel, ma.mean_abs_vel, 1e-9);
    EXPECT_NEAR(mb.max_abs_vel, ma.max_abs_vel, 1e-9);
    EXPECT_NEAR(mb.mean_abs_acc, ma.mean_abs_acc, 1e-9);
    EXPECT_NEAR(mb.signal_energy, ma.signal_energy, 1e-9 * ma.signal_energy);
    EXPECT_EQ(mb.zero_crossing_rate, ma.zero_crossing_rate);
    const auto sa = spectral_features(x, 1.0 / 15, kBands), sb = spectral_features(y, 1.0 / 15, kBands);
    EXPECT_EQ(sb.dominant_freq_hz, sa.dominant_freq_hz);
    EXPECT_NEAR(sb.spectral_entropy, sa.spectral_entropy, 1e-9);
    EXPECT_NEAR(sb.total_band_power, sa.total_band_power, 1e-9 * sa.total_band_power);
    for (std::size_t i = 0; i < kBands.size(); ++i) {
      EXPECT_NEAR(sb.band_power[i], sa.band_power[i], 1e-9 * sa.total_band_power);
    }
  }
}

TEST(Invariance, ScaleEquivariance) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 120);
    const double s = 2.75;
    auto y = x;
    for (auto& v : y) v *= s;
    const auto a = robust_stats(x), b = robust_stats(y);
    EXPECT_NEAR(b.median, s * a.median, 1e-12);
    EXPECT_NEAR(b.mad, s * a.mad, 1e-12);
    EXPECT_NEAR(b.iqr, s * a.iqr, 1e-12);
    EXPECT_NEAR(b.range, s * a.range, 1e-12);
    const auto ma = motion_energy(x, 1.0 / 15), mb = motion_energy(y, 1.0 / 15);
    EXPECT_NEAR(mb.signal_energy, s * s * ma.signal_energy, 1e-9 * mb.signal_energy);
    EXPECT_EQ(mb.zero_crossing_rate, ma.zero_crossing_rate);
    const auto sa = spectral_features(x, 1.0 / 15, kBands), sb = spectral_features(y, 1.0 / 15, kBands);
    EXPECT_EQ(sb.dominant_freq_hz, sa.dominant_freq_hz);
    EXPECT_NEAR(sb.total_band_power, s * s * sa.total_band_power, 1e-9 * sb.total_band_power);
  }
}

ChannelSchema one_channel() {
  ChannelSchema s;
  s.entries = {{"head_yaw", ChannelGroup::kHeadPose}};
  return s;
}

SessionTimeline timeline_with(const ChannelSchema& schema, std::size_t frames, bool face,
                              std::mt19937_64& rng) {
  SessionTimeline tl;
  tl.session_id = "s1";
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < frames; ++i) {
    std::vector<double> ch(schema.arity());
    for (auto& v : ch) v = g(rng);
    tl.frames.push_back({"s1", std::int64_t(i * 1000 / 15), face, ch});
  }
  tl.duration_ms = 8000;
  return tl;
}

Window whole(const SessionTimeline& tl, double valid_ratio) {
  Window w;
  w.session_id = "s1";
  w.end_ms = 8000;
  w.frame_end = tl.frames.size();
  w.valid_frame_ratio = valid_ratio;
  return w;
}

TEST(Featurize, VectorLengthForOneChannel) {
  const FeatureSpec spec;
  EXPECT_EQ(features_per_channel(spec), 9u + 5u + (3u + 4u));
  EXPECT_EQ(feature_names(one_channel(), spec).size(), 23u);
  std::mt19937_64 rng(1);
  const auto tl = timeline_with(one_channel(), 120, true, rng);
  EXPECT_EQ(featurize_window(whole(tl, 1.0), tl, one_channel(), spec).values.size(), 23u);
}

TEST(Featurize, NamesAreUniqueAndOrdered) {
  const auto names = feature_names(default_schema(), FeatureSpec{});
  EXPECT_EQ(names.size(), 112u * 21u + 2u);
  EXPECT_EQ(names.front(), "face_x.median");
  EXPECT_EQ(names[20], "face_x.band_power_2_4");
  EXPECT_EQ(names.back(), "frame_count");
  std::set<std::string> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), names.size());
}

TEST(Featurize, DeterministicAndConsistentWithKernels) {
  ChannelSchema schema;
  for (int c = 0; c < 6; ++c) schema.entries.push_back({"c" + std::to_string(c), ChannelGroup::kOther});
  std::mt19937_64 rng(2);
  const auto tl = timeline_with(schema, 120, true, rng);
  const FeatureSpec spec;
  const auto w = whole(tl, 1.0);
  const auto a = featurize_window(w, tl, schema, spec);
  const auto b = featurize_window(w, tl, schema, spec);
  EXPECT_EQ(a.values, b.values);
  const double dt = 1.0 / 15.0;
  for (std::size_t c = 0; c < schema.arity(); ++c) {
    std::vector<double> x;
    for (const auto& f : tl.frames) x.push_back(f.channels[c]);
    const auto r = robust_stats(x);
    const auto m = motion_energy(x, dt);
    const auto s = spectral_features(x, dt, spec.bands_hz);
    const std::vector<double> expect = {
        r.median, r.mad, r.iqr, r.p10, r.p90, r.trimmed_mean, r.min, r.max, r.range,
        m.mean_abs_vel, m.max_abs_vel, m.mean_abs_acc, m.signal_energy, m.zero_crossing_rate,
        s.dominant_freq_hz, s.spectral_entropy, s.total_band_power, s.band_power[0],
        s.band_power[1], s.band_power[2], s.band_power[3]};
    for (std::size_t i = 0; i < expect.size(); ++i) {
      EXPECT_EQ(a.values[c * 21 + i], expect[i]) << "channel " << c << " feature " << i;
    }
  }
  EXPECT_EQ(a.values[6 * 21], 1.0);
  EXPECT_EQ(a.values[6 * 21 + 1], 120.0);
}

TEST(Featurize, AllFramesWithoutFace) {
  std::mt19937_64 rng(3);
  const auto tl = timeline_with(one_channel(), 120, false, rng);
  const auto v = featurize_window(whole(tl, 0.0), tl, one_channel(), FeatureSpec{}).values;
  for (std::size_t i = 0; i < 21; ++i) EXPECT_EQ(v[i], 0.0) << i;
  EXPECT_EQ(v[21], 0.0);
  EXPECT_EQ(v[22], 120.0);
}

TEST(FeatureSpec, BandsMustFitBelowNyquist) {
  FeatureSpec spec;
  spec.bands_hz.push_back({4.0, 8.0});
  EXPECT_THROW(spec.validate(15.0), ValidationError);
  EXPECT_NO_THROW(FeatureSpec{}.validate(15.0));
}

}  // namespace
}  // namespace engage
