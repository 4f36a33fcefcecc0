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

// On-disk corpus layout:
//
//   <dir>/schema.txt            channel schema
//   <dir>/platforms.txt         platform URL patterns
//   <dir>/manifest.csv          one row per session with its cell and files
//   <dir>/sessions/<id>.frames.csv, <id>.urls.csv, <id>.labels.csv
//   <dir>/truth_states.csv      hidden state track (synthetic corpora only)

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "engage/errors.hpp"
#include "engage/ingest.hpp"
#include "engage/synth.hpp"
#include "engage/text.hpp"

namespace engage {

struct Corpus {
  ChannelSchema schema;
  PlatformPatternSet patterns;
  std::vector<SessionTimeline> sessions;
};

inline constexpr std::string_view kManifestHeader =
    "session_id,classroom_id,platform_id,duration_ms,frames_file,urls_file,labels_file";
inline constexpr std::string_view kTruthHeader = "session_id,start_ms,end_ms,state";

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  return out;
}

// Rethrows parse errors with the file name attached.
template <typename F>
auto with_file(const std::filesystem::path& p, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(p.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void write_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                         const std::vector<std::vector<StateSegment>>* truth = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "sessions", ec);
  if (ec) throw IoError("cannot create '" + (dir / "sessions").string() + "': " + ec.message());
  {
    auto out = detail::open_out(dir / "schema.txt");
    write_schema(out, corpus.schema);
  }
  {
    auto out = detail::open_out(dir / "platforms.txt");
    write_patterns(out, corpus.patterns);
  }
  auto manifest = detail::open_out(dir / "manifest.csv");
  manifest << kManifestHeader << '\n';
  for (const auto& s : corpus.sessions) {
    const std::string base = "sessions/" + s.session_id;
    const std::string frames = base + ".frames.csv";
    const std::string urls = base + ".urls.csv";
    const std::string labels = base + ".labels.csv";
    {
      auto out = detail::open_out(dir / frames);
      write_frames(out, s.frames, corpus.schema);
    }
    {
      auto out = detail::open_out(dir / urls);
      write_url_log(out, s.url_events);
    }
    {
      auto out = detail::open_out(dir / labels);
      write_labels(out, s.labels);
    }
    manifest << s.session_id << ',' << s.metadata.classroom_id << ',' << s.metadata.platform_id
             << ',' << s.duration_ms << ',' << frames << ',' << urls << ',' << labels << '\n';
  }
  if (!manifest) throw IoError("write failed for manifest.csv");
  if (truth != nullptr) {
    auto out = detail::open_out(dir / "truth_states.csv");
    out << kTruthHeader << '\n';
    for (std::size_t i = 0; i < truth->size() && i < corpus.sessions.size(); ++i) {
      for (const auto& seg : (*truth)[i]) {
        out << corpus.sessions[i].session_id << ',' << seg.start_ms << ',' << seg.end_ms << ','
            << to_string(seg.state) << '\n';
      }
    }
  }
}

inline Corpus to_corpus(const GeneratedCorpus& gen) {
  Corpus c;
  c.schema = gen.schema;
  c.patterns = gen.patterns;
  for (const auto& s : gen.sessions) c.sessions.push_back(s.timeline);
  return c;
}

inline void write_corpus(const std::filesystem::path& dir, const GeneratedCorpus& gen) {
  std::vector<std::vector<StateSegment>> truth;
  for (const auto& s : gen.sessions) truth.push_back(s.true_state_track);
  write_corpus(dir, to_corpus(gen), &truth);
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  {
    auto in = detail::open_in(dir / "schema.txt");
    corpus.schema = detail::with_file(dir / "schema.txt", [&] { return parse_schema(in); });
  }
  {
    auto in = detail::open_in(dir / "platforms.txt");
    corpus.patterns = detail::with_file(dir / "platforms.txt", [&] { return parse_patterns(in); });
  }
  auto manifest = detail::open_in(dir / "manifest.csv");
  std::string line;
  long row = 1;
  if (!text::read_line(manifest, line)) throw ParseError("manifest.csv is empty");
  detail::expect_header(line, kManifestHeader, row);
  while (text::read_line(manifest, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 7) throw ParseError("manifest.csv: expected 7 fields", row);
    const std::string sid(text::trim(f[0]));
    SessionMetadata meta{std::string(text::trim(f[1])), std::string(text::trim(f[2]))};
    const auto duration = text::require_int(f[3], "duration_ms", row);
    const auto frames_path = dir / std::string(text::trim(f[4]));
    const auto urls_path = dir / std::string(text::trim(f[5]));
    const auto labels_path = dir / std::string(text::trim(f[6]));
    auto fin = detail::open_in(frames_path);
    auto frames = detail::with_file(frames_path, [&] { return parse_frames(fin, corpus.schema); });
    auto uin = detail::open_in(urls_path);
    auto urls = detail::with_file(urls_path, [&] { return parse_url_log(uin); });
    auto lin = detail::open_in(labels_path);
    auto labels = detail::with_file(labels_path, [&] { return parse_labels(lin); });
    corpus.sessions.push_back(build_timeline(sid, std::move(frames), std::move(urls),
                                             std::move(labels), std::move(meta), duration));
  }
  return corpus;
}

inline std::vector<std::vector<StateSegment>> load_truth_states(const std::filesystem::path& dir,
                                                                const Corpus& corpus) {
  auto in = detail::open_in(dir / "truth_states.csv");
  std::vector<std::vector<StateSegment>> out(corpus.sessions.size());
  std::string line;
  long row = 1;
  if (!text::read_line(in, line)) throw ParseError("truth_states.csv is empty");
  detail::expect_header(line, kTruthHeader, row);
  while (text::read_line(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 4) throw ParseError("truth_states.csv: expected 4 fields", row);
    const auto state = parse_hidden_state(text::trim(f[3]));
    if (!state) throw ParseError("truth_states.csv: unknown state", row);
    std::size_t i = 0;
    while (i < corpus.sessions.size() && corpus.sessions[i].session_id != text::trim(f[0])) ++i;
    if (i == corpus.sessions.size()) throw ParseError("truth_states.csv: unknown session", row);
    out[i].push_back({text::require_int(f[1], "start_ms", row),
                      text::require_int(f[2], "end_ms", row), *state});
  }
  return out;
}

}  // namespace engage
