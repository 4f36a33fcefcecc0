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

// Per-window appearance features: robust statistics, motion/energy measures
// and spectral descriptors for every channel, plus window-level globals.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "engage/errors.hpp"
#include "engage/ingest.hpp"
#include "engage/text.hpp"
#include "engage/windowing.hpp"

namespace engage {

struct ChannelSeries {
  std::vector<double> values;
  std::vector<bool> valid_mask;
  double dt_s = 1.0;
};

struct ImputedSeries {
  std::vector<double> values;
  double dt_s = 1.0;
  // No valid sample at all; values are zeros.
  bool all_invalid = false;
};

// Linear interpolation between the nearest valid neighbours; edge runs copy
// the nearest valid value.
inline ImputedSeries impute(const ChannelSeries& series) {
  if (series.values.size() != series.valid_mask.size()) {
    throw ValidationError("impute: values and valid_mask differ in length");
  }
  ImputedSeries out;
  out.dt_s = series.dt_s;
  out.values = series.values;
  const std::size_t n = out.values.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (series.valid_mask[i]) {
      first = i;
      break;
    }
  }
  if (first == n) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.all_invalid = true;
    return out;
  }
  for (std::size_t i = 0; i < first; ++i) out.values[i] = series.values[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (!series.valid_mask[i]) continue;
    const double a = series.values[prev];
    const double b = series.values[i];
    const double gap = static_cast<double>(i - prev);
    for (std::size_t j = prev + 1; j < i; ++j) {
      out.values[j] = a + (b - a) * (static_cast<double>(j - prev) / gap);
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) out.values[i] = series.values[prev];
  return out;
}

namespace detail {

// Mean computed relative to the first element so a constant series has a
// mean exactly equal to its value.
inline double anchored_mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double anchor = x.front();
  double acc = 0.0;
  for (double v : x) acc += v - anchor;
  return anchor + acc / static_cast<double>(x.size());
}

inline std::vector<double> mean_removed(std::span<const double> x) {
  const double m = anchored_mean(x);
  std::vector<double> y(x.begin(), x.end());
  for (double& v : y) v -= m;
  return y;
}

}  // namespace detail

// Linear-interpolation percentile of an ascending range, q in [0, 1].
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct RobustStats {
  double median = 0, mad = 0, iqr = 0, p10 = 0, p90 = 0, trimmed_mean = 0;
  double min = 0, max = 0, range = 0;

  static constexpr std::size_t kCount = 9;
};

inline RobustStats robust_stats(std::span<const double> x, double trim_fraction = 0.1) {
  RobustStats s;
  if (x.empty()) return s;
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  s.median = percentile_sorted(v, 0.5);
  s.p10 = percentile_sorted(v, 0.1);
  s.p90 = percentile_sorted(v, 0.9);
  s.iqr = percentile_sorted(v, 0.75) - percentile_sorted(v, 0.25);
  s.min = v.front();
  s.max = v.back();
  s.range = s.max - s.min;
  const auto k = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(v.size())));
  s.trimmed_mean = detail::anchored_mean(std::span<const double>(v).subspan(k, v.size() - 2 * k));
  for (double& d : v) d = std::abs(d - s.median);
  // Median of the deviations without a second full sort.
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) {
    s.mad = v[mid];
  } else {
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    s.mad = lo + 0.5 * (hi - lo);
  }
  return s;
}

struct MotionEnergy {
  double mean_abs_vel = 0, max_abs_vel = 0, mean_abs_acc = 0;
  double signal_energy = 0, zero_crossing_rate = 0;

  static constexpr std::size_t kCount = 5;
};

// Energy and zero crossings use the mean-removed series; the crossing rate is
// per second of window (n * dt_s).
inline MotionEnergy motion_energy(std::span<const double> x, double dt_s) {
  MotionEnergy m;
  const std::size_t n = x.size();
  if (n == 0) return m;
  if (n >= 2) {
    double sum = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double v = std::abs(x[i + 1] - x[i]) / dt_s;
      sum += v;
      m.max_abs_vel = std::max(m.max_abs_vel, v);
    }
    m.mean_abs_vel = sum / static_cast<double>(n - 1);
  }
  if (n >= 3) {
    double sum = 0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
      sum += std::abs(x[i + 2] - 2.0 * x[i + 1] + x[i]) / (dt_s * dt_s);
    }
    m.mean_abs_acc = sum / static_cast<double>(n - 2);
  }
  const auto y = detail::mean_removed(x);
  std::size_t crossings = 0;
  for (std::size_t i = 0; i < n; ++i) {
    m.signal_energy += y[i] * y[i];
    if (i + 1 < n && ((y[i] > 0) != (y[i + 1] > 0))) ++crossings;
  }
  m.zero_crossing_rate = static_cast<double>(crossings) / (static_cast<double>(n) * dt_s);
  return m;
}

// Twiddle table for length-N transforms.
class DftPlan {
 public:
  explicit DftPlan(std::size_t n) : n_(n), twiddle_(n) {
    if (n < 2) throw ValidationError("dft: length must be >= 2");
    for (std::size_t m = 0; m < n; ++m) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
      twiddle_[m] = {std::cos(angle), std::sin(angle)};
    }
  }

  std::size_t size() const { return n_; }

  // One-sided spectrum X_0 .. X_{N/2}, X_k = sum_n x_n exp(-2 pi i k n / N).
  std::vector<std::complex<double>> forward(std::span<const double> x) const {
    if (x.size() != n_) throw ValidationError("dft: input length does not match plan");
    std::vector<std::complex<double>> out(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
      double re = 0, im = 0;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        re += x[i] * twiddle_[idx].real();
        im += x[i] * twiddle_[idx].imag();
        idx += k;
        if (idx >= n_) idx -= n_;
      }
      out[k] = {re, im};
    }
    return out;
  }

  // Transforms `channels` series at once. Input is sample-major
  // (x[i * channels + c]); output re/im are bin-major ((N/2+1) x channels).
  // Each bin sums over samples in the same order as forward(), so both paths
  // give identical results.
  void forward_batch(std::span<const double> x, std::size_t channels, std::vector<double>& re,
                     std::vector<double>& im) const {
    if (x.size() != n_ * channels) throw ValidationError("dft: batch shape mismatch");
    const std::size_t bins = n_ / 2 + 1;
    re.assign(bins * channels, 0.0);
    im.assign(bins * channels, 0.0);
    constexpr std::size_t kBlock = 4;
    for (std::size_t k = 0; k < bins; ++k) {
      std::size_t c = 0;
      for (; c + kBlock <= channels; c += kBlock) {
        double r[kBlock] = {}, m[kBlock] = {};
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n_; ++i) {
          const double wr = twiddle_[idx].real();
          const double wi = twiddle_[idx].imag();
          const double* xi = x.data() + i * channels + c;
          for (std::size_t b = 0; b < kBlock; ++b) {
            r[b] += xi[b] * wr;
            m[b] += xi[b] * wi;
          }
          idx += k;
          if (idx >= n_) idx -= n_;
        }
        for (std::size_t b = 0; b < kBlock; ++b) {
          re[k * channels + c + b] = r[b];
          im[k * channels + c + b] = m[b];
        }
      }
      for (; c < channels; ++c) {
        double r = 0, m = 0;
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n_; ++i) {
          r += x[i * channels + c] * twiddle_[idx].real();
          m += x[i * channels + c] * twiddle_[idx].imag();
          idx += k;
          if (idx >= n_) idx -= n_;
        }
        re[k * channels + c] = r;
        im[k * channels + c] = m;
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;
};

inline std::vector<std::complex<double>> dft(std::span<const double> x) {
  return DftPlan(x.size()).forward(x);
}

// Power per one-sided bin, doubled for bins that stand for a conjugate pair,
// scaled so the bins sum to the mean square of the input:
//   sum_k P_k = (1/N) sum_n x_n^2.
inline std::vector<double> one_sided_power(std::span<const std::complex<double>> spectrum,
                                           std::size_t n) {
  std::vector<double> p(spectrum.size());
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = (unpaired ? 1.0 : 2.0) * std::norm(spectrum[k]) * scale;
  }
  return p;
}

struct FrequencyBand {
  double low_hz = 0;
  double high_hz = 0;

  bool operator==(const FrequencyBand&) const = default;
};

struct SpectralFeatures {
  double dominant_freq_hz = 0;
  double spectral_entropy = 0;  // nats
  double total_band_power = 0;  // all non-DC bins
  std::vector<double> band_power;
};

namespace detail {

// Spectral descriptors from one-sided bin powers of a length-n series.
inline SpectralFeatures spectral_from_power(std::span<const double> power, std::size_t n,
                                            double dt_s, std::span<const FrequencyBand> bands) {
  SpectralFeatures f;
  f.band_power.assign(bands.size(), 0.0);
  const double bin_hz = 1.0 / (static_cast<double>(n) * dt_s);
  double total = 0;
  std::size_t best = 0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    total += power[k];
    if (best == 0 || power[k] > power[best]) best = k;
    const double freq = static_cast<double>(k) * bin_hz;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      if (freq >= bands[b].low_hz && freq < bands[b].high_hz) f.band_power[b] += power[k];
    }
  }
  f.total_band_power = total;
  if (total <= 0.0) {
    f.band_power.assign(bands.size(), 0.0);
    return f;
  }
  f.dominant_freq_hz = static_cast<double>(best) * bin_hz;
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double p = power[k] / total;
    if (p > 0) f.spectral_entropy -= p * std::log(p);
  }
  return f;
}

}  // namespace detail

// The series is mean-removed before the transform. Bins are assigned to a
// band by their centre frequency, [low, high).
inline SpectralFeatures spectral_features(std::span<const double> x, double dt_s,
                                          std::span<const FrequencyBand> bands) {
  const std::size_t n = x.size();
  if (n < 2) {
    SpectralFeatures f;
    f.band_power.assign(bands.size(), 0.0);
    return f;
  }
  const auto y = detail::mean_removed(x);
  const auto power = one_sided_power(DftPlan(n).forward(y), n);
  return detail::spectral_from_power(power, n, dt_s, bands);
}

// ---------------------------------------------------------------------------
// Window featurization
// ---------------------------------------------------------------------------

struct FeatureFamilies {
  bool robust_stats = true;
  bool motion_energy = true;
  bool spectral = true;

  bool operator==(const FeatureFamilies&) const = default;
};

struct FeatureSpec {
  FeatureFamilies families;
  std::vector<FrequencyBand> bands_hz = {{0.1, 0.5}, {0.5, 1.0}, {1.0, 2.0}, {2.0, 4.0}};
  double trim_fraction = 0.1;

  void validate(double sample_rate_hz) const {
    if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
      throw ValidationError("trim_fraction must lie in [0, 0.5)");
    }
    const double nyquist = sample_rate_hz / 2.0;
    for (const auto& b : bands_hz) {
      if (!(b.low_hz > 0.0 && b.low_hz < b.high_hz && b.high_hz <= nyquist)) {
        throw ValidationError("frequency band [" + text::format_double(b.low_hz) + ", " +
                              text::format_double(b.high_hz) + ") outside (0, " +
                              text::format_double(nyquist) + "]");
      }
    }
  }

  bool operator==(const FeatureSpec&) const = default;
};

inline std::size_t features_per_channel(const FeatureSpec& spec) {
  std::size_t n = 0;
  if (spec.families.robust_stats) n += RobustStats::kCount;
  if (spec.families.motion_energy) n += MotionEnergy::kCount;
  if (spec.families.spectral) n += 3 + spec.bands_hz.size();
  return n;
}

inline constexpr std::size_t kGlobalFeatureCount = 2;

inline std::vector<std::string> feature_names(const ChannelSchema& schema,
                                              const FeatureSpec& spec) {
  std::vector<std::string> names;
  names.reserve(schema.arity() * features_per_channel(spec) + kGlobalFeatureCount);
  for (const auto& e : schema.entries) {
    auto add = [&](std::string_view stat) { names.push_back(e.name + "." + std::string(stat)); };
    if (spec.families.robust_stats) {
      for (auto s : {"median", "mad", "iqr", "p10", "p90", "trimmed_mean", "min", "max", "range"}) {
        add(s);
      }
    }
    if (spec.families.motion_energy) {
      for (auto s : {"mean_abs_vel", "max_abs_vel", "mean_abs_acc", "signal_energy",
                     "zero_crossing_rate"}) {
        add(s);
      }
    }
    if (spec.families.spectral) {
      add("dominant_freq_hz");
      add("spectral_entropy");
      add("total_band_power");
      for (const auto& b : spec.bands_hz) {
        add("band_power_" + text::format_double(b.low_hz) + "_" + text::format_double(b.high_hz));
      }
    }
  }
  names.emplace_back("valid_frame_ratio");
  names.emplace_back("frame_count");
  return names;
}

// Feature values for one window, in feature_names() order.
inline std::vector<double> featurize_values(const Window& window, const SessionTimeline& timeline,
                                            const ChannelSchema& schema, const FeatureSpec& spec) {
  if (window.frame_end > timeline.frames.size() || window.frame_begin > window.frame_end) {
    throw ValidationError("featurize: window frame slice outside timeline");
  }
  const std::size_t n = window.frame_count();
  const double dt = 1.0 / schema.sample_rate_hz;
  std::vector<bool> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = timeline.frames[window.frame_begin + i];
    if (f.channels.size() != schema.arity()) {
      throw SchemaError("featurize: frame at t_ms=" + std::to_string(f.t_ms) + " has " +
                        std::to_string(f.channels.size()) + " channels, schema has " +
                        std::to_string(schema.arity()));
    }
    mask[i] = f.face_detected;
  }
  const std::size_t n_ch = schema.arity();
  const std::size_t per_channel = features_per_channel(spec);
  std::vector<double> out(n_ch * per_channel + kGlobalFeatureCount, 0.0);

  // Imputed channel series; sample-major mean-removed copy for the batch DFT.
  const bool spectral = spec.families.spectral && n >= 2;
  std::vector<double> centered(spectral ? n * n_ch : 0);
  ChannelSeries series;
  series.dt_s = dt;
  series.valid_mask = mask;
  series.values.resize(n);
  for (std::size_t c = 0; c < n_ch; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      series.values[i] = timeline.frames[window.frame_begin + i].channels[c];
    }
    const auto imp = impute(series);
    const std::span<const double> x(imp.values);
    double* dst = out.data() + c * per_channel;
    if (spec.families.robust_stats) {
      const auto r = robust_stats(x, spec.trim_fraction);
      for (double v : {r.median, r.mad, r.iqr, r.p10, r.p90, r.trimmed_mean, r.min, r.max, r.range}) {
        *dst++ = v;
      }
    }
    if (spec.families.motion_energy) {
      const auto m = motion_energy(x, dt);
      for (double v : {m.mean_abs_vel, m.max_abs_vel, m.mean_abs_acc, m.signal_energy,
                       m.zero_crossing_rate}) {
        *dst++ = v;
      }
    }
    if (spectral) {
      const auto y = detail::mean_removed(x);
      for (std::size_t i = 0; i < n; ++i) centered[i * n_ch + c] = y[i];
    }
  }
  if (spectral) {
    const DftPlan plan(n);
    std::vector<double> re, im;
    plan.forward_batch(centered, n_ch, re, im);
    const std::size_t bins = n / 2 + 1;
    std::vector<std::complex<double>> spectrum(bins);
    const std::size_t offset = per_channel - (3 + spec.bands_hz.size());
    for (std::size_t c = 0; c < n_ch; ++c) {
      for (std::size_t k = 0; k < bins; ++k) spectrum[k] = {re[k * n_ch + c], im[k * n_ch + c]};
      const auto s = detail::spectral_from_power(one_sided_power(spectrum, n), n, dt, spec.bands_hz);
      double* dst = out.data() + c * per_channel + offset;
      *dst++ = s.dominant_freq_hz;
      *dst++ = s.spectral_entropy;
      *dst++ = s.total_band_power;
      for (double b : s.band_power) *dst++ = b;
    }
  }
  out[n_ch * per_channel] = window.valid_frame_ratio;
  out[n_ch * per_channel + 1] = static_cast<double>(n);
  return out;
}

struct WindowKey {
  std::string session_id;
  std::int64_t index = 0;

  auto operator<=>(const WindowKey&) const = default;
};

struct FeatureVector {
  std::shared_ptr<const std::vector<std::string>> names;
  std::vector<double> values;
  WindowKey window_ref;
};

inline FeatureVector featurize_window(const Window& window, const SessionTimeline& timeline,
                                      const ChannelSchema& schema, const FeatureSpec& spec) {
  FeatureVector fv;
  fv.names = std::make_shared<const std::vector<std::string>>(feature_names(schema, spec));
  fv.values = featurize_values(window, timeline, schema, spec);
  fv.window_ref = {window.session_id, window.index};
  return fv;
}

}  // namespace engage
