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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "engage/corpus.hpp"
#include "engage/experiment.hpp"
#include "engage/synth.hpp"
#include "engage/windowing.hpp"
#include "support.hpp"

namespace engage {
namespace {

namespace fs = std::filesystem;

using testing::small_config;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("engage_synth_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Synth, NoFaceDropKeepsEveryFrame) {
  auto cfg = small_config();
  for (auto& e : cfg.emission) e.face_drop_prob = 0.0;
  const auto s = generate_session(cfg, cfg.cells[0], 0);
  ASSERT_FALSE(s.timeline.frames.empty());
  for (const auto& f : s.timeline.frames) ASSERT_TRUE(f.face_detected);
}

TEST(Synth, NoOffPlatformMeansOneUrlEvent) {
  auto cfg = small_config();
  cfg.transitions = {{{0, 1, 0}, {1, 0, 0}, {0.5, 0.5, 0}}};
  const auto s = generate_session(cfg, cfg.cells[0], 0);
  ASSERT_EQ(s.timeline.url_events.size(), 1u);
  EXPECT_EQ(s.timeline.url_events[0].t_ms, 0);
  const auto w = make_windows(s.timeline, {}, synth_platform_patterns(cfg));
  ASSERT_FALSE(w.empty());
  for (const auto& x : w) EXPECT_EQ(x.platform_coverage, 1.0);
}

TEST(Synth, SameSeedSameFiles) {
  auto cfg = small_config();
  cfg.cells = {{"C1", "Math"}, {"C1", "ESL"}};
  const auto a = scratch_dir("a"), b = scratch_dir("b");
  write_corpus(a, generate_corpus(cfg));
  write_corpus(b, generate_corpus(cfg));
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_EQ(files, 4u + 2u * 3u);
  cfg.seed = 43;
  const auto c = scratch_dir("c");
  write_corpus(c, generate_corpus(cfg));
  EXPECT_NE(slurp(a / "sessions" / "C1-Math-s00.frames.csv"),
            slurp(c / "sessions" / "C1-Math-s00.frames.csv"));
}

TEST(Synth, SessionsAreIndependentOfGenerationOrder) {
  auto cfg = small_config();
  cfg.n_sessions = 3;
  const auto corpus = generate_corpus(cfg);
  EXPECT_EQ(generate_session(cfg, cfg.cells[0], 2).timeline, corpus.sessions[2].timeline);
  EXPECT_EQ(generate_session(cfg, cfg.cells[0], 1).timeline, corpus.sessions[1].timeline);
}

TEST(Synth, DefaultCellsFollowTableTwoLayout) {
  SynthConfig cfg;
  ASSERT_EQ(cfg.cells.size(), 3u);
  EXPECT_EQ(cfg.cells[0], (CellId{"C1", "Math"}));
  EXPECT_EQ(cfg.cells[1], (CellId{"C2", "Math"}));
  EXPECT_EQ(cfg.cells[2], (CellId{"C1", "ESL"}));
  cfg.schema = testing::small_schema();
  cfg.session_duration_ms = 60'000;
  const auto corpus = generate_corpus(cfg);
  ASSERT_EQ(corpus.sessions.size(), 6u);
  EXPECT_EQ(corpus.sessions[0].timeline.session_id, "C1-Math-s00");
  EXPECT_EQ(corpus.sessions[3].timeline.metadata, (SessionMetadata{"C2", "Math"}));
  EXPECT_EQ(corpus.sessions[5].timeline.metadata, (SessionMetadata{"C1", "ESL"}));
  EXPECT_EQ(corpus.patterns.patterns.size(), 2u);
}

TEST(Synth, EmptyCellFailsDownstream) {
  auto cfg = small_config();
  cfg.cells = {{"C1", "Math"}, {"C2", "Math"}};
  cfg.n_sessions = 0;
  const auto corpus = to_corpus(generate_corpus(cfg));
  EXPECT_TRUE(corpus.sessions.empty());
  const auto fc = featurize_corpus(corpus, {}, {});
  ExperimentConfig ec;
  ec.runs.push_back({"r", "T", "C1", "C2", Selector::parse("classroom=C1"),
                     Selector::parse("classroom=C2"), false});
  EXPECT_THROW(run_experiment(fc, corpus.patterns, ec), ValidationError);
}

TEST(Synth, LabelsMatchHiddenTrack) {
  auto cfg = small_config(7);
  cfg.n_sessions = 4;
  for (const auto& s : generate_corpus(cfg).sessions) {
    const auto& track = s.true_state_track;
    const auto& labels = s.timeline.labels;
    ASSERT_EQ(labels.size(), track.size());
    EXPECT_EQ(track.front().start_ms, 0);
    EXPECT_EQ(track.back().end_ms, cfg.session_duration_ms);
    for (std::size_t i = 0; i < track.size(); ++i) {
      EXPECT_EQ(labels[i].start_ms, track[i].start_ms);
      EXPECT_EQ(labels[i].end_ms, track[i].end_ms);
      EXPECT_EQ(labels[i].label, label_of(track[i].state));
      if (i > 0) {
        EXPECT_EQ(track[i].start_ms, track[i - 1].end_ms);
        EXPECT_NE(track[i].state, track[i - 1].state);
      }
      if (track[i].end_ms < cfg.session_duration_ms) {
        EXPECT_GE(track[i].end_ms - track[i].start_ms, 2000);
      }
    }
  }
}

TEST(Synth, CoverageMatchesHiddenOffPlatformTime) {
  auto cfg = small_config(9);
  cfg.session_duration_ms = 1'200'000;
  const auto s = generate_session(cfg, cfg.cells[0], 0);
  const auto patterns = synth_platform_patterns(cfg);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> start(0, cfg.session_duration_ms - 8000);
  const double frame_period = 1.0 / cfg.schema.sample_rate_hz;
  for (int i = 0; i < 100; ++i) {
    Window w;
    w.start_ms = start(rng);
    w.end_ms = w.start_ms + 8000;
    std::int64_t off = 0;
    for (const auto& seg : s.true_state_track) {
      if (seg.state == HiddenState::kOffPlatform) off += overlap_ms(w.span(), {seg.start_ms, seg.end_ms});
    }
    const double hidden_on = 1.0 - double(off) / 8000.0;
    EXPECT_NEAR(platform_coverage(w, s.timeline.url_events, patterns), hidden_on,
                frame_period * 1000.0 / 8000.0);
  }
}

// Stationary law of the embedded chain by direct 3x3 elimination, then time
// weighting by the mean of max(Exp(m), floor).
std::array<double, 3> analytic_fractions(const SynthConfig& cfg) {
  const auto& P = cfg.transitions;
  // pi (P - I) = 0 with pi_0 + pi_1 + pi_2 = 1; drop the last balance equation.
  double a[3][4] = {{P[0][0] - 1, P[1][0], P[2][0], 0},
                    {P[0][1], P[1][1] - 1, P[2][1], 0},
                    {1, 1, 1, 1}};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::array<double, 3> out{};
  double total = 0;
  for (int k = 0; k < 3; ++k) {
    const double m = cfg.dwell_mean_s[std::size_t(k)], floor = cfg.min_dwell_s;
    out[std::size_t(k)] = (a[k][3] / a[k][k]) * (floor + m * std::exp(-floor / m));
    total += out[std::size_t(k)];
  }
  for (auto& v : out) v /= total;
  return out;
}

TEST(Synth, StationaryFractionsMatchAnalytic) {
  const SynthConfig cfg;
  const auto lib = stationary_time_fractions(cfg);
  const auto ref = analytic_fractions(cfg);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(lib[k], ref[k], 1e-9);
  // The default corpus spends roughly 15% of the time off the platform.
  EXPECT_NEAR(ref[2], 0.15, 0.02);
}

TEST(Synth, OffPlatformFractionOverTwentySessions) {
  auto cfg = small_config(42);
  cfg.session_duration_ms = 2'400'000;
  cfg.n_sessions = 20;
  std::int64_t off = 0, total = 0;
  for (const auto& s : generate_corpus(cfg).sessions) {
    for (const auto& seg : s.true_state_track) {
      if (seg.state == HiddenState::kOffPlatform) off += seg.end_ms - seg.start_ms;
    }
    total += cfg.session_duration_ms;
  }
  const double expected = analytic_fractions(cfg)[2];
  EXPECT_NEAR(double(off) / double(total), expected, 0.2 * expected);
}

double appearance_f1(double separability, std::uint64_t seed) {
  auto cfg = small_config(seed);
  cfg.cells = {{"C1", "Math"}, {"C2", "Math"}};
  cfg.session_duration_ms = 600'000;
  cfg.appearance_separability = separability;
  const auto corpus = to_corpus(generate_corpus(cfg));
  const auto fc = featurize_corpus(corpus, {}, {});
  ExperimentConfig ec;
  ec.runs.push_back({"r", "T", "C1", "C2", Selector::parse("classroom=C1"),
                     Selector::parse("classroom=C2"), false});
  ec.modes = {FusionMode::kAppearanceOnly};
  ec.train.n_trees = 50;
  ec.seed = seed;
  const auto res = run_experiment(fc, corpus.patterns, ec);
  return res.at(0).reports.at(FusionMode::kAppearanceOnly).overall_f1_weighted;
}

TEST(Synth, SeparabilityMonotonicity) {
  std::vector<double> mean;
  for (double sep : {0.5, 1.0, 2.0}) {
    double acc = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) acc += appearance_f1(sep, seed);
    mean.push_back(acc / 5.0);
  }
  EXPECT_LE(mean[0], mean[1]);
  EXPECT_LE(mean[1], mean[2]);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg;
  cfg.transitions[0] = {0, 0.5, 0.4};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.dwell_mean_s[2] = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.cells.push_back({"C1", "Math"});
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_NO_THROW(SynthConfig{}.validate());
}

}  // namespace
}  // namespace engage
