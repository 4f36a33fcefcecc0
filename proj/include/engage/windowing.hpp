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

// Fixed-length sliding windows over a session, with platform coverage and
// ground-truth label assignment.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "engage/errors.hpp"
#include "engage/ingest.hpp"
#include "engage/text.hpp"

namespace engage {

enum class LabelPolicy { kMajority, kStrict };

enum class TruthLabel { kOnTask, kOffTask, kUnlabeled };

inline std::string_view to_string(TruthLabel l) {
  switch (l) {
    case TruthLabel::kOnTask: return "on_task";
    case TruthLabel::kOffTask: return "off_task";
    case TruthLabel::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline std::optional<TruthLabel> parse_truth_label(std::string_view s) {
  if (s == "on_task") return TruthLabel::kOnTask;
  if (s == "off_task") return TruthLabel::kOffTask;
  if (s == "unlabeled") return TruthLabel::kUnlabeled;
  return std::nullopt;
}

struct WindowConfig {
  std::int64_t window_ms = 8000;
  std::int64_t hop_ms = 4000;
  LabelPolicy label_policy = LabelPolicy::kMajority;
  // A window is on-platform (goes to the appearance model) iff
  // platform_coverage >= coverage_threshold.
  double coverage_threshold = 0.5;
  double min_valid_frame_ratio = 0.5;

  void validate() const {
    if (window_ms <= 0) throw ValidationError("window_ms must be > 0");
    if (hop_ms <= 0 || hop_ms > window_ms) {
      throw ValidationError("hop_ms must satisfy 0 < hop_ms <= window_ms");
    }
    if (!(coverage_threshold >= 0.0 && coverage_threshold <= 1.0)) {
      throw ValidationError("coverage threshold must lie in [0, 1]");
    }
    if (!(min_valid_frame_ratio >= 0.0 && min_valid_frame_ratio <= 1.0)) {
      throw ValidationError("min_valid_frame_ratio must lie in [0, 1]");
    }
  }
};

struct Window {
  std::string session_id;
  std::int64_t index = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  // Frames [frame_begin, frame_end) of the owning timeline.
  std::size_t frame_begin = 0;
  std::size_t frame_end = 0;
  double platform_coverage = 0.0;
  double valid_frame_ratio = 0.0;
  TruthLabel truth_label = TruthLabel::kUnlabeled;

  TimeInterval span() const { return {start_ms, end_ms}; }
  std::size_t frame_count() const { return frame_end - frame_begin; }
  bool operator==(const Window&) const = default;
};

// Number of full-length windows that fit in `duration_ms`.
inline std::int64_t window_count(std::int64_t duration_ms, std::int64_t window_ms,
                                 std::int64_t hop_ms) {
  if (duration_ms < window_ms) return 0;
  return (duration_ms - window_ms) / hop_ms + 1;
}

inline TruthLabel assign_label(const TimeInterval& window,
                               const std::vector<LabelInterval>& labels, LabelPolicy policy) {
  std::int64_t on = 0;
  std::int64_t off = 0;
  for (const auto& l : labels) {
    const auto ov = overlap_ms(window, {l.start_ms, l.end_ms});
    (l.label == Label::kOnTask ? on : off) += ov;
  }
  const auto len = window.length();
  if (policy == LabelPolicy::kStrict) {
    if (on == len) return TruthLabel::kOnTask;
    if (off == len) return TruthLabel::kOffTask;
    return TruthLabel::kUnlabeled;
  }
  if (2 * (on + off) < len) return TruthLabel::kUnlabeled;
  // Ties go to OffTask.
  return on > off ? TruthLabel::kOnTask : TruthLabel::kOffTask;
}

inline double coverage_from_intervals(const TimeInterval& window,
                                      const std::vector<TimeInterval>& on_platform) {
  if (window.length() <= 0) return 0.0;
  std::int64_t covered = 0;
  for (const auto& iv : on_platform) covered += overlap_ms(window, iv);
  return static_cast<double>(covered) / static_cast<double>(window.length());
}

// Fraction of the window during which the active URL is on the platform.
inline double platform_coverage(const Window& window, const std::vector<UrlEvent>& url_events,
                                const PlatformPatternSet& patterns) {
  return coverage_from_intervals(window.span(),
                                 platform_intervals(url_events, patterns, window.end_ms));
}

// Windows start at k * hop_ms; only full-length windows are produced.
// Fills frame slices, valid_frame_ratio and truth_label; platform_coverage is
// left at 0 (see annotate_coverage / make_windows).
inline std::vector<Window> slice_windows(const SessionTimeline& timeline,
                                         const WindowConfig& cfg) {
  cfg.validate();
  const auto k = window_count(timeline.duration_ms, cfg.window_ms, cfg.hop_ms);
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(k));
  const auto& frames = timeline.frames;
  auto lower = [&](std::int64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(frames.begin(), frames.end(), t,
                         [](const FrameRecord& f, std::int64_t v) { return f.t_ms < v; }) -
        frames.begin());
  };
  for (std::int64_t i = 0; i < k; ++i) {
    Window w;
    w.session_id = timeline.session_id;
    w.index = i;
    w.start_ms = i * cfg.hop_ms;
    w.end_ms = w.start_ms + cfg.window_ms;
    w.frame_begin = lower(w.start_ms);
    w.frame_end = lower(w.end_ms);
    std::size_t valid = 0;
    for (auto f = w.frame_begin; f < w.frame_end; ++f) valid += frames[f].face_detected ? 1 : 0;
    w.valid_frame_ratio =
        w.frame_count() == 0 ? 0.0
                             : static_cast<double>(valid) / static_cast<double>(w.frame_count());
    w.truth_label = assign_label(w.span(), timeline.labels, cfg.label_policy);
    out.push_back(std::move(w));
  }
  return out;
}

inline void annotate_coverage(std::vector<Window>& windows, const SessionTimeline& timeline,
                              const PlatformPatternSet& patterns) {
  const auto on = platform_intervals(timeline.url_events, patterns, timeline.duration_ms);
  for (auto& w : windows) w.platform_coverage = coverage_from_intervals(w.span(), on);
}

inline std::vector<Window> make_windows(const SessionTimeline& timeline, const WindowConfig& cfg,
                                        const PlatformPatternSet& patterns) {
  auto windows = slice_windows(timeline, cfg);
  annotate_coverage(windows, timeline, patterns);
  return windows;
}

// ---------------------------------------------------------------------------
// Window table CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kWindowsHeader =
    "session_id,index,start_ms,platform_coverage,valid_frame_ratio,truth_label";

inline void write_windows(std::ostream& out, const std::vector<Window>& windows) {
  out << kWindowsHeader << '\n';
  std::string line;
  for (const auto& w : windows) {
    line = w.session_id;
    line += ',';
    line += std::to_string(w.index);
    line += ',';
    line += std::to_string(w.start_ms);
    line += ',';
    text::append_double(line, w.platform_coverage);
    line += ',';
    text::append_double(line, w.valid_frame_ratio);
    line += ',';
    line += to_string(w.truth_label);
    line += '\n';
    out << line;
  }
}

// The table carries no end time or frame slice; end_ms is start_ms + window_ms.
inline std::vector<Window> parse_windows(std::istream& in, std::int64_t window_ms = 8000) {
  std::vector<Window> out;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) throw ParseError("window table is empty (missing header)");
  detail::expect_header(line, kWindowsHeader, row);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 6) throw ParseError("expected 6 fields", row);
    Window w;
    w.session_id = detail::require_session(f[0], row);
    w.index = text::require_int(f[1], "index", row);
    w.start_ms = text::require_int(f[2], "start_ms", row);
    w.end_ms = w.start_ms + window_ms;
    w.platform_coverage = text::require_double(f[3], "platform_coverage", row);
    w.valid_frame_ratio = text::require_double(f[4], "valid_frame_ratio", row);
    if (!(w.platform_coverage >= 0 && w.platform_coverage <= 1) ||
        !(w.valid_frame_ratio >= 0 && w.valid_frame_ratio <= 1)) {
      throw ParseError("ratio outside [0, 1]", row);
    }
    const auto label = parse_truth_label(text::trim(f[5]));
    if (!label) throw ParseError("unknown truth_label '" + std::string(f[5]) + "'", row);
    w.truth_label = *label;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace engage
