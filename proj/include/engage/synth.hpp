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

// Seeded generator of synthetic classroom corpora. A semi-Markov hidden
// state (OnTask, OffTask on the platform, Off-Platform) drives appearance
// channel emissions, the URL log and the label intervals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "engage/errors.hpp"
#include "engage/forest.hpp"
#include "engage/ingest.hpp"
#include "engage/text.hpp"

namespace engage {

enum class HiddenState { kOnTask = 0, kOffTaskOnPlatform = 1, kOffPlatform = 2 };

inline constexpr std::size_t kHiddenStates = 3;

inline std::string_view to_string(HiddenState s) {
  switch (s) {
    case HiddenState::kOnTask: return "on_task";
    case HiddenState::kOffTaskOnPlatform: return "off_task_on_platform";
    case HiddenState::kOffPlatform: return "off_platform";
  }
  return "on_task";
}

inline std::optional<HiddenState> parse_hidden_state(std::string_view s) {
  for (auto h : {HiddenState::kOnTask, HiddenState::kOffTaskOnPlatform, HiddenState::kOffPlatform}) {
    if (to_string(h) == s) return h;
  }
  return std::nullopt;
}

inline Label label_of(HiddenState s) {
  return s == HiddenState::kOnTask ? Label::kOnTask : Label::kOffTask;
}

struct StateSegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  HiddenState state = HiddenState::kOnTask;

  bool operator==(const StateSegment&) const = default;
};

struct CellId {
  std::string classroom_id;
  std::string platform_id;

  bool operator==(const CellId&) const = default;
};

// Emission parameters for one hidden state. Channel means move by
// mean_shift * separability along each informative channel's direction; the
// noise, oscillation amplitude and face-drop contrasts against OnTask are
// scaled by separability too, so separability 0 makes states look alike.
struct StateEmission {
  double mean_shift = 0.0;
  double noise_scale = 1.0;
  double osc_hz = 0.3;
  double osc_amp = 0.2;
  double face_drop_prob = 0.02;
};

struct SynthConfig {
  std::vector<CellId> cells = {{"C1", "Math"}, {"C2", "Math"}, {"C1", "ESL"}};
  int n_sessions = 2;  // per cell
  std::int64_t session_duration_ms = 2'400'000;
  ChannelSchema schema = default_schema();

  std::array<double, kHiddenStates> dwell_mean_s = {60.0, 20.0, 28.0};
  double min_dwell_s = 2.0;
  // Row = current state, column = next state.
  std::array<std::array<double, kHiddenStates>, kHiddenStates> transitions = {{
      {0.0, 0.65, 0.35},
      {0.85, 0.0, 0.15},
      {0.85, 0.15, 0.0},
  }};

  std::array<StateEmission, kHiddenStates> emission = {{
      {0.0, 1.0, 0.25, 0.3, 0.02},
      {1.0, 1.1, 1.5, 0.5, 0.10},
      {0.35, 1.05, 0.5, 0.35, 0.05},
  }};
  // Per-frame noise sd by channel group (ChannelGroup order).
  std::array<double, 6> group_noise_sd = {1.0, 1.0, 1.5, 1.5, 1.0, 1.0};
  double informative_fraction = 0.3;
  double appearance_separability = 0.75;
  // Random per-segment shift of every channel mean.
  double segment_jitter_sd = 0.6;
  double student_shift_sd = 0.4;
  double classroom_shift_sd = 0.5;
  double platform_shift_sd = 0.4;
  std::uint64_t seed = 42;

  void validate() const {
    schema.validate();
    if (n_sessions < 0) throw ValidationError("synth: n_sessions must be >= 0");
    if (session_duration_ms <= 0) throw ValidationError("synth: session duration must be > 0");
    if (!(min_dwell_s >= 0)) throw ValidationError("synth: min_dwell_s must be >= 0");
    for (double m : dwell_mean_s) {
      if (!(m > 0)) throw ValidationError("synth: dwell means must be > 0");
    }
    for (const auto& row : transitions) {
      double s = 0;
      for (double p : row) {
        if (!(p >= 0)) throw ValidationError("synth: negative transition probability");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) throw ValidationError("synth: transition rows must sum to 1");
    }
    for (const auto& e : emission) {
      if (!(e.face_drop_prob >= 0 && e.face_drop_prob <= 1)) {
        throw ValidationError("synth: face_drop_prob must lie in [0, 1]");
      }
      if (!(e.noise_scale >= 0) || !(e.osc_hz >= 0)) {
        throw ValidationError("synth: noise_scale and osc_hz must be >= 0");
      }
    }
    for (double sd : group_noise_sd) {
      if (!(sd >= 0)) throw ValidationError("synth: group noise sd must be >= 0");
    }
    if (!(appearance_separability >= 0)) throw ValidationError("synth: separability must be >= 0");
    if (!(informative_fraction >= 0 && informative_fraction <= 1)) {
      throw ValidationError("synth: informative_fraction must lie in [0, 1]");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      if (c.classroom_id.empty() || c.platform_id.empty()) {
        throw ValidationError("synth: cell ids must be non-empty");
      }
      if (std::find(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(i), c) !=
          cells.begin() + static_cast<std::ptrdiff_t>(i)) {
        throw ValidationError("synth: duplicate cell " + c.classroom_id + "/" + c.platform_id);
      }
    }
  }
};

// Long-run fraction of time spent in each hidden state: stationary law of
// the embedded jump chain weighted by the expected (floored) dwell times.
inline std::array<double, kHiddenStates> stationary_time_fractions(const SynthConfig& cfg) {
  std::array<double, kHiddenStates> pi{1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int it = 0; it < 10000; ++it) {
    std::array<double, kHiddenStates> next{};
    for (std::size_t i = 0; i < kHiddenStates; ++i) {
      for (std::size_t j = 0; j < kHiddenStates; ++j) next[j] += pi[i] * cfg.transitions[i][j];
    }
    // Lazy step keeps periodic chains converging.
    for (std::size_t j = 0; j < kHiddenStates; ++j) next[j] = 0.5 * (next[j] + pi[j]);
    pi = next;
  }
  std::array<double, kHiddenStates> f{};
  double total = 0;
  for (std::size_t k = 0; k < kHiddenStates; ++k) {
    const double m = cfg.dwell_mean_s[k];
    const double floor_s = cfg.min_dwell_s;
    const double expected_dwell = floor_s + m * std::exp(-floor_s / m);
    f[k] = pi[k] * expected_dwell;
    total += f[k];
  }
  for (double& v : f) v /= total;
  return f;
}

inline std::string platform_host(std::string_view platform_id) {
  return text::to_lower(platform_id) + ".learn.example";
}

// host_suffix pattern per distinct platform among the cells.
inline PlatformPatternSet synth_platform_patterns(const SynthConfig& cfg) {
  PlatformPatternSet set;
  std::vector<std::string> seen;
  for (const auto& c : cfg.cells) {
    const auto host = platform_host(c.platform_id);
    if (std::find(seen.begin(), seen.end(), host) != seen.end()) continue;
    seen.push_back(host);
    set.add(PatternKind::kHostSuffix, host);
  }
  return set;
}

struct GeneratedSession {
  SessionTimeline timeline;
  std::vector<StateSegment> true_state_track;
};

namespace detail {

inline std::uint64_t stream_key(std::string_view tag, std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
  h = (h ^ 0xff) * 0x100000001b3ULL;
  for (unsigned char c : id) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

inline std::vector<double> gaussian_vector(std::uint64_t seed, std::uint64_t key, std::size_t n,
                                           double sd) {
  auto rng = substream(seed, key);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = sd * g(rng);
  return v;
}

inline double quantize(double v) { return std::round(v * 1e4) / 1e4; }

constexpr std::array<std::string_view, 5> kDistractors = {
    "https://www.videos.example/watch?v=", "https://social.example.com/feed/",
    "https://games.example.net/play/", "https://mail.example.org/inbox/",
    "https://news.example.com/story/"};

}  // namespace detail

// Channel layout shared by every session of a corpus: base means and the
// direction (-1, 0, +1) in which each channel responds to off-task states.
struct ChannelLayout {
  std::vector<double> base;
  std::vector<double> direction;
};

inline ChannelLayout make_channel_layout(const SynthConfig& cfg) {
  const std::size_t n = cfg.schema.arity();
  ChannelLayout layout;
  layout.base = detail::gaussian_vector(cfg.seed, detail::stream_key("layout", "base"), n, 1.0);
  auto rng = substream(cfg.seed, detail::stream_key("layout", "direction"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  layout.direction.resize(n);
  for (auto& d : layout.direction) {
    const bool informative = u(rng) < cfg.informative_fraction;
    const bool positive = u(rng) < 0.5;
    d = informative ? (positive ? 1.0 : -1.0) : 0.0;
  }
  return layout;
}

// One session. `session_index` selects the per-session random substream
// inside the cell, so sessions can be generated in any order.
inline GeneratedSession generate_session(const SynthConfig& cfg, const ChannelLayout& layout,
                                         const CellId& cell, int session_index) {
  cfg.validate();
  const std::size_t n_ch = cfg.schema.arity();
  std::string sid = cell.classroom_id + "-" + cell.platform_id + "-s" +
                    (session_index < 10 ? "0" : "") + std::to_string(session_index);
  auto rng = substream(cfg.seed, detail::stream_key("session", sid));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Hidden state track.
  const auto fractions = stationary_time_fractions(cfg);
  auto draw_from = [&](const std::array<double, kHiddenStates>& probs) {
    double u = unif(rng);
    for (std::size_t k = 0; k < kHiddenStates; ++k) {
      if (u < probs[k]) return static_cast<HiddenState>(k);
      u -= probs[k];
    }
    for (std::size_t k = kHiddenStates; k-- > 0;) {
      if (probs[k] > 0) return static_cast<HiddenState>(k);
    }
    return HiddenState::kOnTask;
  };
  std::vector<StateSegment> track;
  HiddenState state = draw_from(fractions);
  std::int64_t t = 0;
  const std::int64_t duration = cfg.session_duration_ms;
  while (t < duration) {
    std::exponential_distribution<double> dwell(1.0 / cfg.dwell_mean_s[static_cast<std::size_t>(state)]);
    const double dwell_s = std::max(cfg.min_dwell_s, dwell(rng));
    const auto len = std::max<std::int64_t>(1, std::llround(dwell_s * 1000.0));
    const std::int64_t end = std::min(duration, t + len);
    if (!track.empty() && track.back().state == state) {
      track.back().end_ms = end;
    } else {
      track.push_back({t, end, state});
    }
    t = end;
    state = draw_from(cfg.transitions[static_cast<std::size_t>(state)]);
  }

  // Mean offsets that do not depend on the state.
  const auto classroom = detail::gaussian_vector(
      cfg.seed, detail::stream_key("classroom", cell.classroom_id), n_ch, cfg.classroom_shift_sd);
  const auto platform = detail::gaussian_vector(
      cfg.seed, detail::stream_key("platform", cell.platform_id), n_ch, cfg.platform_shift_sd);
  std::vector<double> fixed(n_ch);
  for (std::size_t c = 0; c < n_ch; ++c) {
    fixed[c] = layout.base[c] + classroom[c] + platform[c] + cfg.student_shift_sd * gauss(rng);
  }
  std::vector<double> noise_sd(n_ch);
  // Head motion oscillates the face-location and head-pose channels only.
  std::vector<double> osc_gain(n_ch, 0.0);
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto g = cfg.schema.entries[c].group;
    noise_sd[c] = cfg.group_noise_sd[static_cast<std::size_t>(g)];
    if (g == ChannelGroup::kFaceLocation || g == ChannelGroup::kHeadPose) osc_gain[c] = noise_sd[c];
  }

  std::array<StateEmission, kHiddenStates> effective = cfg.emission;
  for (std::size_t k = 1; k < kHiddenStates; ++k) {
    const auto& base = cfg.emission[0];
    auto& e = effective[k];
    const double sep = cfg.appearance_separability;
    e.noise_scale = std::max(0.0, base.noise_scale + sep * (e.noise_scale - base.noise_scale));
    e.osc_amp = base.osc_amp + sep * (e.osc_amp - base.osc_amp);
    e.face_drop_prob =
        std::clamp(base.face_drop_prob + sep * (e.face_drop_prob - base.face_drop_prob), 0.0, 1.0);
  }

  // Frames.
  std::vector<FrameRecord> frames;
  const double period_ms = 1000.0 / cfg.schema.sample_rate_hz;
  std::vector<double> seg_mean(n_ch);
  double seg_phase = 0;
  std::size_t seg = 0;
  std::size_t seg_ready = static_cast<std::size_t>(-1);
  for (std::int64_t k = 0;; ++k) {
    const auto tf = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * period_ms));
    if (tf >= duration) break;
    while (track[seg].end_ms <= tf) ++seg;
    const auto& em = effective[static_cast<std::size_t>(track[seg].state)];
    if (seg_ready != seg) {
      const double shift = em.mean_shift * cfg.appearance_separability;
      for (std::size_t c = 0; c < n_ch; ++c) {
        seg_mean[c] = fixed[c] + shift * layout.direction[c] + cfg.segment_jitter_sd * gauss(rng);
      }
      seg_phase = 2.0 * std::numbers::pi * unif(rng);
      seg_ready = seg;
    }
    FrameRecord f;
    f.session_id = sid;
    f.t_ms = tf;
    f.face_detected = unif(rng) >= em.face_drop_prob;
    f.channels.resize(n_ch);
    const double osc =
        em.osc_amp * std::sin(2.0 * std::numbers::pi * em.osc_hz * static_cast<double>(tf) / 1000.0 +
                              seg_phase);
    for (std::size_t c = 0; c < n_ch; ++c) {
      const double v = seg_mean[c] + osc * osc_gain[c] + em.noise_scale * noise_sd[c] * gauss(rng);
      f.channels[c] = f.face_detected ? detail::quantize(v) : 0.0;
    }
    frames.push_back(std::move(f));
  }

  // URL log: an event whenever platform status flips.
  std::vector<UrlEvent> urls;
  const auto host = platform_host(cell.platform_id);
  std::uniform_int_distribution<int> item(1, 999);
  std::uniform_int_distribution<std::size_t> pick(0, detail::kDistractors.size() - 1);
  int prev_on = -1;
  for (const auto& s : track) {
    const int on = s.state == HiddenState::kOffPlatform ? 0 : 1;
    if (on == prev_on) continue;
    std::string url = on ? "https://" + host + "/lesson/" + std::to_string(item(rng))
                         : std::string(detail::kDistractors[pick(rng)]) + std::to_string(item(rng));
    urls.push_back({sid, s.start_ms, std::move(url)});
    prev_on = on;
  }

  std::vector<LabelInterval> labels;
  labels.reserve(track.size());
  for (const auto& s : track) labels.push_back({sid, s.start_ms, s.end_ms, label_of(s.state)});

  GeneratedSession out;
  out.timeline = build_timeline(sid, std::move(frames), std::move(urls), std::move(labels),
                                {cell.classroom_id, cell.platform_id}, duration);
  out.true_state_track = std::move(track);
  return out;
}

inline GeneratedSession generate_session(const SynthConfig& cfg, const CellId& cell,
                                         int session_index) {
  return generate_session(cfg, make_channel_layout(cfg), cell, session_index);
}

struct GeneratedCorpus {
  ChannelSchema schema;
  PlatformPatternSet patterns;
  std::vector<GeneratedSession> sessions;  // cell-major, then session index
};

inline GeneratedCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  GeneratedCorpus out;
  out.schema = cfg.schema;
  out.patterns = synth_platform_patterns(cfg);
  const auto layout = make_channel_layout(cfg);
  for (const auto& cell : cfg.cells) {
    for (int i = 0; i < cfg.n_sessions; ++i) {
      out.sessions.push_back(generate_session(cfg, layout, cell, i));
    }
  }
  return out;
}

}  // namespace engage
