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

// Input streams (appearance frames, URL activity log, label intervals),
// platform URL matching, and per-session timeline assembly.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "engage/errors.hpp"
#include "engage/text.hpp"

namespace engage {

enum class ChannelGroup { kFaceLocation, kHeadPose, kLandmark, kExpression, kEmotion, kOther };

inline std::string_view to_string(ChannelGroup g) {
  switch (g) {
    case ChannelGroup::kFaceLocation: return "face_location";
    case ChannelGroup::kHeadPose: return "head_pose";
    case ChannelGroup::kLandmark: return "landmark";
    case ChannelGroup::kExpression: return "expression";
    case ChannelGroup::kEmotion: return "emotion";
    case ChannelGroup::kOther: return "other";
  }
  return "other";
}

inline std::optional<ChannelGroup> parse_channel_group(std::string_view s) {
  for (auto g : {ChannelGroup::kFaceLocation, ChannelGroup::kHeadPose,
                 ChannelGroup::kLandmark, ChannelGroup::kExpression,
                 ChannelGroup::kEmotion, ChannelGroup::kOther}) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

struct ChannelEntry {
  std::string name;
  ChannelGroup group = ChannelGroup::kOther;

  bool operator==(const ChannelEntry&) const = default;
};

struct ChannelSchema {
  std::vector<ChannelEntry> entries;
  double sample_rate_hz = 15.0;

  std::size_t arity() const { return entries.size(); }

  void validate() const {
    if (!(sample_rate_hz > 0)) {
      throw ValidationError("channel schema: sample_rate_hz must be > 0");
    }
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
      if (e.name.empty()) throw ValidationError("channel schema: empty channel name");
      if (e.name.find_first_of(", \t") != std::string::npos) {
        throw ValidationError("channel schema: bad channel name '" + e.name + "'");
      }
      if (!seen.insert(e.name).second) {
        throw ValidationError("channel schema: duplicate channel '" + e.name + "'");
      }
    }
  }

  bool operator==(const ChannelSchema&) const = default;
};

// 2 face-location + 3 head-pose + 78 landmark + 22 expression + 7 emotion
// channels at 15 Hz.
inline ChannelSchema default_schema() {
  ChannelSchema s;
  s.sample_rate_hz = 15.0;
  auto add = [&](std::string name, ChannelGroup g) {
    s.entries.push_back({std::move(name), g});
  };
  add("face_x", ChannelGroup::kFaceLocation);
  add("face_y", ChannelGroup::kFaceLocation);
  add("head_pitch", ChannelGroup::kHeadPose);
  add("head_yaw", ChannelGroup::kHeadPose);
  add("head_roll", ChannelGroup::kHeadPose);
  auto numbered = [](std::string_view prefix, int i) {
    std::string n(prefix);
    if (i < 10) n += '0';
    n += std::to_string(i);
    return n;
  };
  for (int i = 0; i < 78; ++i) add(numbered("landmark_", i), ChannelGroup::kLandmark);
  for (int i = 0; i < 22; ++i) add(numbered("expression_", i), ChannelGroup::kExpression);
  for (const char* e : {"anger", "contempt", "disgust", "fear", "joy", "sadness", "surprise"}) {
    add(std::string("emotion_") + e, ChannelGroup::kEmotion);
  }
  return s;
}

// Schema text: a `sample_rate_hz <hz>` line, then one `<group> <name>` line
// per channel in order. `#` starts a comment.
inline ChannelSchema parse_schema(std::istream& in) {
  ChannelSchema s;
  bool have_rate = false;
  std::string line;
  long row = 0;
  while (text::read_line(in, line)) {
    ++row;
    auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto sp = body.find_first_of(" \t");
    if (sp == std::string_view::npos) throw ParseError("expected '<key> <value>'", row);
    const auto key = body.substr(0, sp);
    const auto value = text::trim(body.substr(sp + 1));
    if (key == "sample_rate_hz") {
      s.sample_rate_hz = text::require_double(value, "sample_rate_hz", row);
      have_rate = true;
    } else if (auto g = parse_channel_group(key)) {
      s.entries.push_back({std::string(value), *g});
    } else {
      throw ParseError("unknown channel group '" + std::string(key) + "'", row);
    }
  }
  if (!have_rate) throw ParseError("schema is missing sample_rate_hz");
  s.validate();
  return s;
}

inline void write_schema(std::ostream& out, const ChannelSchema& s) {
  out << "sample_rate_hz " << text::format_double(s.sample_rate_hz) << '\n';
  for (const auto& e : s.entries) out << to_string(e.group) << ' ' << e.name << '\n';
}

struct FrameRecord {
  std::string session_id;
  std::int64_t t_ms = 0;
  // When false the channel values are placeholders, not observations.
  bool face_detected = false;
  std::vector<double> channels;

  bool operator==(const FrameRecord&) const = default;
};

struct UrlEvent {
  std::string session_id;
  std::int64_t t_ms = 0;
  std::string url;

  bool operator==(const UrlEvent&) const = default;
};

enum class Label { kOnTask, kOffTask };

inline std::string_view to_string(Label l) {
  return l == Label::kOnTask ? "on_task" : "off_task";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "on_task") return Label::kOnTask;
  if (s == "off_task") return Label::kOffTask;
  return std::nullopt;
}

struct LabelInterval {
  std::string session_id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  Label label = Label::kOnTask;

  bool operator==(const LabelInterval&) const = default;
};

// Half-open [start_ms, end_ms).
struct TimeInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  std::int64_t length() const { return end_ms - start_ms; }
  bool operator==(const TimeInterval&) const = default;
};

inline std::int64_t overlap_ms(const TimeInterval& a, const TimeInterval& b) {
  const auto lo = std::max(a.start_ms, b.start_ms);
  const auto hi = std::min(a.end_ms, b.end_ms);
  return hi > lo ? hi - lo : 0;
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

namespace detail {

inline void expect_header(std::string_view got, std::string_view want, long row) {
  if (text::trim(got) != want) {
    throw ParseError("bad header, expected '" + std::string(want) + "'", row);
  }
}

inline std::string frames_header(const ChannelSchema& schema) {
  std::string h = "session_id,t_ms,face_detected";
  for (const auto& e : schema.entries) {
    h += ',';
    h += e.name;
  }
  return h;
}

// Timestamps must strictly increase within each session (strict = true) or
// never decrease (strict = false).
class OrderCheck {
 public:
  explicit OrderCheck(bool strict) : strict_(strict) {}

  void check(const std::string& session, std::int64_t t, long row) {
    auto [it, inserted] = last_.try_emplace(session, t);
    if (inserted) return;
    if (t < it->second || (strict_ && t == it->second)) {
      throw ParseError("non-monotonic t_ms " + std::to_string(t) +
                           " after " + std::to_string(it->second) +
                           " in session '" + session + "'",
                       row);
    }
    it->second = t;
  }

 private:
  bool strict_;
  std::unordered_map<std::string, std::int64_t> last_;
};

inline std::string require_session(std::string_view s, long row) {
  s = text::trim(s);
  if (s.empty()) throw ParseError("empty session_id", row);
  return std::string(s);
}

inline std::int64_t require_time(std::string_view s, std::string_view field, long row) {
  const auto t = text::require_int(s, field, row);
  if (t < 0) throw ParseError(std::string(field) + " must be >= 0", row);
  return t;
}

}  // namespace detail

// Reads a frames CSV. Fails atomically: either every row is returned or an
// exception names the first offending row.
inline std::vector<FrameRecord> parse_frames(std::istream& in, const ChannelSchema& schema) {
  std::vector<FrameRecord> out;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) throw ParseError("frames file is empty (missing header)");
  detail::expect_header(line, detail::frames_header(schema), row);
  const std::size_t n_fields = 3 + schema.arity();
  detail::OrderCheck order(/*strict=*/true);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != n_fields) {
      throw ParseError("arity mismatch: expected " + std::to_string(schema.arity()) +
                           " channels, got " +
                           std::to_string(fields.size() < 3 ? 0 : fields.size() - 3),
                       row);
    }
    FrameRecord r;
    r.session_id = detail::require_session(fields[0], row);
    r.t_ms = detail::require_time(fields[1], "t_ms", row);
    const auto fd = text::trim(fields[2]);
    if (fd == "1") {
      r.face_detected = true;
    } else if (fd != "0") {
      throw ParseError("face_detected must be 0 or 1", row);
    }
    r.channels.resize(schema.arity());
    for (std::size_t c = 0; c < schema.arity(); ++c) {
      r.channels[c] = text::require_double(fields[3 + c], schema.entries[c].name, row);
    }
    order.check(r.session_id, r.t_ms, row);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_frames(std::ostream& out, const std::vector<FrameRecord>& frames,
                         const ChannelSchema& schema) {
  out << detail::frames_header(schema) << '\n';
  std::string line;
  for (const auto& f : frames) {
    line.clear();
    line += f.session_id;
    line += ',';
    line += std::to_string(f.t_ms);
    line += f.face_detected ? ",1" : ",0";
    for (double v : f.channels) {
      line += ',';
      text::append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

// ---------------------------------------------------------------------------
// URL log
// ---------------------------------------------------------------------------

inline constexpr std::string_view kUrlLogHeader = "session_id,t_ms,url";

// An empty stream yields no events. Events must be non-decreasing in t_ms
// within a session; URLs are kept verbatim.
inline std::vector<UrlEvent> parse_url_log(std::istream& in) {
  std::vector<UrlEvent> out;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) return out;
  detail::expect_header(line, kUrlLogHeader, row);
  detail::OrderCheck order(/*strict=*/false);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',', 3);
    if (fields.size() != 3) throw ParseError("expected session_id,t_ms,url", row);
    UrlEvent e;
    e.session_id = detail::require_session(fields[0], row);
    e.t_ms = detail::require_time(fields[1], "t_ms", row);
    e.url = std::string(fields[2]);
    order.check(e.session_id, e.t_ms, row);
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_url_log(std::ostream& out, const std::vector<UrlEvent>& events) {
  out << kUrlLogHeader << '\n';
  for (const auto& e : events) out << e.session_id << ',' << e.t_ms << ',' << e.url << '\n';
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLabelsHeader = "session_id,start_ms,end_ms,label";

namespace detail {

inline void check_no_overlap(const std::vector<LabelInterval>& sorted) {
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& a = sorted[i - 1];
    const auto& b = sorted[i];
    if (a.session_id == b.session_id && b.start_ms < a.end_ms) {
      throw ValidationError("overlapping label intervals in session '" + a.session_id +
                            "': [" + std::to_string(a.start_ms) + "," +
                            std::to_string(a.end_ms) + ") and [" +
                            std::to_string(b.start_ms) + "," + std::to_string(b.end_ms) + ")");
    }
  }
}

inline void sort_labels(std::vector<LabelInterval>& labels) {
  std::stable_sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
    if (a.session_id != b.session_id) return a.session_id < b.session_id;
    return a.start_ms < b.start_ms;
  });
}

}  // namespace detail

// Returns intervals sorted by (session_id, start_ms).
inline std::vector<LabelInterval> parse_labels(std::istream& in) {
  std::vector<LabelInterval> out;
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) return out;
  detail::expect_header(line, kLabelsHeader, row);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 4) throw ParseError("expected session_id,start_ms,end_ms,label", row);
    LabelInterval li;
    li.session_id = detail::require_session(fields[0], row);
    li.start_ms = detail::require_time(fields[1], "start_ms", row);
    li.end_ms = detail::require_time(fields[2], "end_ms", row);
    if (li.start_ms >= li.end_ms) throw ParseError("start_ms must be < end_ms", row);
    const auto token = text::trim(fields[3]);
    const auto label = parse_label(token);
    if (!label) throw ParseError("unknown label '" + std::string(token) + "'", row);
    li.label = *label;
    out.push_back(std::move(li));
  }
  detail::sort_labels(out);
  detail::check_no_overlap(out);
  return out;
}

inline void write_labels(std::ostream& out, const std::vector<LabelInterval>& labels) {
  out << kLabelsHeader << '\n';
  for (const auto& l : labels) {
    out << l.session_id << ',' << l.start_ms << ',' << l.end_ms << ',' << to_string(l.label)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// URL normalization and platform matching
// ---------------------------------------------------------------------------

struct NormalizedUrl {
  std::string host;  // lowercased, no port
  std::string path;  // starts with '/', query and fragment removed

  bool operator==(const NormalizedUrl&) const = default;
};

// Accepts `scheme://[user@]host[:port][/path][?query][#fragment]`.
// Returns nullopt when the string does not have that shape.
inline std::optional<NormalizedUrl> try_normalize_url(std::string_view url) {
  url = text::trim(url);
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  for (char c : url.substr(0, sep)) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
      return std::nullopt;
    }
  }
  auto rest = url.substr(sep + 3);
  const auto auth_end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, auth_end);
  auto tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority.remove_prefix(at + 1);
  }
  auto host = authority;
  if (const auto colon = authority.find(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    const auto port = authority.substr(colon + 1);
    if (port.empty()) return std::nullopt;
    for (char c : port) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    }
  }
  if (host.empty()) return std::nullopt;
  for (char c : host) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') {
      return std::nullopt;
    }
  }
  NormalizedUrl n;
  n.host = text::to_lower(host);
  auto path = tail.substr(0, tail.find_first_of("?#"));
  n.path = path.empty() ? "/" : std::string(path);
  return n;
}

inline NormalizedUrl normalize_url(std::string_view url) {
  auto n = try_normalize_url(url);
  if (!n) throw ValidationError("unparseable URL '" + std::string(url) + "'");
  return *std::move(n);
}

enum class PatternKind { kHostSuffix, kPrefix };

struct PlatformPattern {
  PatternKind kind = PatternKind::kHostSuffix;
  std::string value;

  bool operator==(const PlatformPattern&) const = default;
};

struct PlatformPatternSet {
  std::vector<PlatformPattern> patterns;

  // Lowercases `value` and drops any scheme prefix.
  void add(PatternKind kind, std::string_view value) {
    value = text::trim(value);
    if (const auto sep = value.find("://"); sep != std::string_view::npos) {
      value.remove_prefix(sep + 3);
    }
    if (value.empty()) throw ValidationError("platform pattern value is empty");
    patterns.push_back({kind, text::to_lower(value)});
  }

  void validate() const {
    for (const auto& p : patterns) {
      if (p.value.empty()) throw ValidationError("platform pattern value is empty");
      if (p.value != text::to_lower(p.value)) {
        throw ValidationError("platform pattern '" + p.value + "' is not lowercase");
      }
    }
  }

  bool operator==(const PlatformPatternSet&) const = default;
};

// Line-oriented: `host_suffix <value>` or `prefix <value>`; `#` comments.
inline PlatformPatternSet parse_patterns(std::istream& in) {
  PlatformPatternSet set;
  std::string line;
  long row = 0;
  while (text::read_line(in, line)) {
    ++row;
    auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto sp = body.find_first_of(" \t");
    if (sp == std::string_view::npos) throw ParseError("expected '<kind> <value>'", row);
    const auto kind = body.substr(0, sp);
    const auto value = text::trim(body.substr(sp + 1));
    if (kind == "host_suffix") {
      set.add(PatternKind::kHostSuffix, value);
    } else if (kind == "prefix") {
      set.add(PatternKind::kPrefix, value);
    } else {
      throw ParseError("unknown pattern kind '" + std::string(kind) + "'", row);
    }
  }
  return set;
}

inline void write_patterns(std::ostream& out, const PlatformPatternSet& set) {
  for (const auto& p : set.patterns) {
    out << (p.kind == PatternKind::kHostSuffix ? "host_suffix " : "prefix ") << p.value << '\n';
  }
}

// host_suffix matches whole DNS labels ("example.com" matches
// "math.example.com" but not "badexample.com"). prefix compares against the
// lowercased host+path. Unparseable URLs never match.
inline bool match_platform(std::string_view url, const PlatformPatternSet& patterns) {
  if (patterns.patterns.empty()) return false;
  const auto n = try_normalize_url(url);
  if (!n) return false;
  std::string host_path;
  for (const auto& p : patterns.patterns) {
    if (p.kind == PatternKind::kHostSuffix) {
      const auto& h = n->host;
      if (h == p.value) return true;
      if (h.size() > p.value.size() && h.ends_with(p.value) &&
          h[h.size() - p.value.size() - 1] == '.') {
        return true;
      }
    } else {
      if (host_path.empty()) host_path = text::to_lower(n->host + n->path);
      if (host_path.starts_with(p.value)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Session timeline
// ---------------------------------------------------------------------------

struct SessionMetadata {
  std::string classroom_id;
  std::string platform_id;

  bool operator==(const SessionMetadata&) const = default;
};

struct SessionTimeline {
  std::string session_id;
  std::int64_t duration_ms = 0;
  std::vector<FrameRecord> frames;
  std::vector<UrlEvent> url_events;
  std::vector<LabelInterval> labels;
  SessionMetadata metadata;

  bool operator==(const SessionTimeline&) const = default;
};

// Validates and assembles one session. When `duration_ms` is not given it
// defaults to the largest timestamp found in any stream.
inline SessionTimeline build_timeline(std::string session_id, std::vector<FrameRecord> frames,
                                      std::vector<UrlEvent> url_events,
                                      std::vector<LabelInterval> labels,
                                      SessionMetadata metadata,
                                      std::optional<std::int64_t> duration_ms = std::nullopt) {
  if (session_id.empty()) throw ValidationError("timeline: empty session_id");
  if (metadata.classroom_id.empty() || metadata.platform_id.empty()) {
    throw ValidationError("timeline '" + session_id + "': classroom_id and platform_id required");
  }
  auto contamination = [&](const std::string& other) {
    return ValidationError("timeline '" + session_id + "': record from session '" + other +
                           "' mixed in");
  };
  std::int64_t max_t = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.session_id != session_id) throw contamination(f.session_id);
    if (f.t_ms < 0 || (i > 0 && f.t_ms <= frames[i - 1].t_ms)) {
      throw ValidationError("timeline '" + session_id + "': frame timestamps not increasing");
    }
    max_t = std::max(max_t, f.t_ms);
  }
  for (std::size_t i = 0; i < url_events.size(); ++i) {
    const auto& e = url_events[i];
    if (e.session_id != session_id) throw contamination(e.session_id);
    if (e.t_ms < 0 || (i > 0 && e.t_ms < url_events[i - 1].t_ms)) {
      throw ValidationError("timeline '" + session_id + "': URL events not sorted");
    }
    max_t = std::max(max_t, e.t_ms);
  }
  for (const auto& l : labels) {
    if (l.session_id != session_id) throw contamination(l.session_id);
    if (l.start_ms < 0 || l.start_ms >= l.end_ms) {
      throw ValidationError("timeline '" + session_id + "': bad label interval");
    }
    max_t = std::max(max_t, l.end_ms);
  }
  detail::sort_labels(labels);
  detail::check_no_overlap(labels);

  const std::int64_t duration = duration_ms.value_or(max_t);
  if (duration < 0) throw ValidationError("timeline '" + session_id + "': negative duration");
  if (max_t > duration) {
    throw ValidationError("timeline '" + session_id + "': timestamp " + std::to_string(max_t) +
                          " beyond duration " + std::to_string(duration));
  }
  SessionTimeline tl;
  tl.session_id = std::move(session_id);
  tl.duration_ms = duration;
  tl.frames = std::move(frames);
  tl.url_events = std::move(url_events);
  tl.labels = std::move(labels);
  tl.metadata = std::move(metadata);
  return tl;
}

// The URL active at time t: the latest event with t_ms <= t, or nullopt
// before the first event.
inline std::optional<std::string_view> active_url_at(const std::vector<UrlEvent>& events,
                                                     std::int64_t t) {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](std::int64_t v, const UrlEvent& e) { return v < e.t_ms; });
  if (it == events.begin()) return std::nullopt;
  return std::string_view(std::prev(it)->url);
}

// Merged, sorted intervals within [0, duration_ms) during which the active
// URL is on the content platform. Time before the first event is off-platform.
inline std::vector<TimeInterval> platform_intervals(const std::vector<UrlEvent>& events,
                                                    const PlatformPatternSet& patterns,
                                                    std::int64_t duration_ms) {
  std::vector<TimeInterval> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto start = std::min(events[i].t_ms, duration_ms);
    const auto end = i + 1 < events.size() ? std::min(events[i + 1].t_ms, duration_ms) : duration_ms;
    if (end <= start || !match_platform(events[i].url, patterns)) continue;
    if (!out.empty() && out.back().end_ms == start) {
      out.back().end_ms = end;
    } else {
      out.push_back({start, end});
    }
  }
  return out;
}

}  // namespace engage
