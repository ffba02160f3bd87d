#pragma once

// Raw LFP/spike recordings to model-ready series: periodogram, band power
// per non-overlapping window, spike counts per window and alignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "grangerglm/model.hpp"

namespace grangerglm {

struct RawRecording {
  std::vector<double> lfp;
  std::vector<int> spikes;  // 0/1 per sample
  double sample_rate = 1000.0;

  std::size_t size() const { return lfp.size(); }
};

/// Builds the 0/1 indicator vector from sorted event indices.
inline std::vector<int> spikes_from_events(const std::vector<std::size_t>& events, std::size_t n) {
  std::vector<int> out(n, 0);
  for (std::size_t e : events) {
    if (e >= n)
      throw std::invalid_argument("spike index " + std::to_string(e) + " outside [0, " +
                                  std::to_string(n) + ")");
    out[e] = 1;
  }
  return out;
}

struct BandSpec {
  std::string name;
  double lo = 0, hi = 0;  // Hz, half-open (lo, hi]
};

namespace bands {
inline BandSpec delta() { return {"delta", 1, 4}; }
inline BandSpec theta() { return {"theta", 4, 8}; }
inline BandSpec alpha() { return {"alpha", 8, 13}; }
inline BandSpec beta() { return {"beta", 13, 30}; }
inline BandSpec gamma() { return {"gamma", 30, 100}; }
inline BandSpec beta_alt() { return {"beta-alt", 20, 40}; }
}  // namespace bands

inline BandSpec band_by_name(const std::string& name) {
  for (auto b : {bands::delta(), bands::theta(), bands::alpha(), bands::beta(), bands::gamma(),
                 bands::beta_alt()})
    if (b.name == name) return b;
  throw std::invalid_argument("unknown band: " + name);
}

struct WindowedSeries {
  std::vector<double> values;
  std::size_t window_len = 30;
  std::size_t origin = 0;
  Support support = Support::positive_reals;
};

inline constexpr double kBandPowerFloor = 1e-12;

struct Periodogram {
  std::vector<double> frequency;  // Hz, bins j = 1..floor(m/2)
  std::vector<double> power;
};

/// One-sided periodogram of the demeaned segment: power_j = |X_j|^2, with
/// the Nyquist bin halved for even m, so that sum(power) * 2/m equals the
/// sum of squared deviations.
inline Periodogram periodogram(const std::vector<double>& segment, double sample_rate = 1.0) {
  const std::size_t m = segment.size();
  if (m < 4) throw std::invalid_argument("periodogram needs at least 4 samples, got " +
                                         std::to_string(m));
  double mean = 0;
  for (double v : segment) mean += v;
  mean /= double(m);

  static std::mutex planner;  // FFTW planning is not thread-safe
  double* in = fftw_alloc_real(m);
  fftw_complex* out = fftw_alloc_complex(m / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t t = 0; t < m; ++t) in[t] = segment[t] - mean;
  fftw_execute(plan);

  Periodogram p;
  const std::size_t half = m / 2;
  p.frequency.resize(half);
  p.power.resize(half);
  for (std::size_t j = 1; j <= half; ++j) {
    double v = out[j][0] * out[j][0] + out[j][1] * out[j][1];
    if (m % 2 == 0 && j == half) v *= 0.5;
    p.frequency[j - 1] = double(j) * sample_rate / double(m);
    p.power[j - 1] = v;
  }
  {
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return p;
}

/// Does a window of m samples have a Fourier frequency inside (lo, hi]?
inline bool band_resolved(const BandSpec& band, std::size_t m, double sample_rate) {
  for (std::size_t j = 1; j <= m / 2; ++j) {
    const double f = double(j) * sample_rate / double(m);
    if (f > band.lo && f <= band.hi) return true;
  }
  return false;
}

inline std::size_t minimal_window(const BandSpec& band, double sample_rate) {
  for (std::size_t m = 4; m < 1u << 24; ++m)
    if (band_resolved(band, m, sample_rate)) return m;
  throw std::invalid_argument("band " + band.name + " cannot be resolved");
}

class ResolutionError : public std::invalid_argument {
 public:
  ResolutionError(const std::string& what, std::size_t minimal)
      : std::invalid_argument(what), minimal_(minimal) {}
  std::size_t minimal_window() const { return minimal_; }

 private:
  std::size_t minimal_;
};

namespace detail {

inline void check_recording(const RawRecording& rec, std::size_t window_len) {
  if (window_len == 0) throw std::invalid_argument("window length must be positive");
  if (!(rec.sample_rate > 0)) throw std::invalid_argument("sample rate must be positive");
  if (rec.spikes.size() != rec.lfp.size() && !rec.spikes.empty())
    throw std::invalid_argument("lfp and spike columns differ in length");
  if (rec.size() < 2 * window_len)
    throw std::invalid_argument("recording of " + std::to_string(rec.size()) +
                                " samples is shorter than two windows of " +
                                std::to_string(window_len));
}

inline double band_sum(const Periodogram& p, const BandSpec& band) {
  double s = 0;
  for (std::size_t j = 0; j < p.power.size(); ++j)
    if (p.frequency[j] > band.lo && p.frequency[j] <= band.hi) s += p.power[j];
  return s;
}

}  // namespace detail

/// Band power of each non-overlapping window, floored at kBandPowerFloor.
/// `warnings` (optional) receives resolution advisories.
inline WindowedSeries band_power_series(const RawRecording& rec, const BandSpec& band,
                                        std::size_t window_len = 30,
                                        std::vector<std::string>* warnings = nullptr) {
  detail::check_recording(rec, window_len);
  if (!(band.lo < band.hi) || band.lo < 0 || band.hi > rec.sample_rate / 2)
    throw std::invalid_argument("band (" + std::to_string(band.lo) + ", " +
                                std::to_string(band.hi) + "] must lie within (0, " +
                                std::to_string(rec.sample_rate / 2) + "]");
  if (!band_resolved(band, window_len, rec.sample_rate)) {
    const std::size_t need = minimal_window(band, rec.sample_rate);
    throw ResolutionError(
        "band " + band.name + " has no Fourier bin in a " + std::to_string(window_len) +
            "-sample window (resolution " + std::to_string(rec.sample_rate / double(window_len)) +
            " Hz); use windows of at least " + std::to_string(need) +
            " samples or the short-time mode with a longer analysis segment",
        need);
  }
  if (window_len < 8 && warnings)
    warnings->push_back("window length " + std::to_string(window_len) +
                        " < 8 gives very coarse frequency resolution");
  WindowedSeries out;
  out.window_len = window_len;
  out.support = Support::positive_reals;
  const std::size_t n = rec.size() / window_len;
  out.values.resize(n);
  std::vector<double> seg(window_len);
  for (std::size_t w = 0; w < n; ++w) {
    std::copy_n(rec.lfp.begin() + static_cast<std::ptrdiff_t>(w * window_len), window_len,
                seg.begin());
    const auto p = periodogram(seg, rec.sample_rate);
    out.values[w] = std::max(detail::band_sum(p, band), kBandPowerFloor);
  }
  return out;
}

/// Short-time variant: each window's power comes from a longer analysis
/// segment of `segment_len` samples centred on the window (clamped to the
/// recording), rescaled by window_len / segment_len.
inline WindowedSeries band_power_series_stft(const RawRecording& rec, const BandSpec& band,
                                             std::size_t window_len, std::size_t segment_len) {
  detail::check_recording(rec, window_len);
  if (segment_len < window_len || segment_len > rec.size())
    throw std::invalid_argument("analysis segment must lie between the window length and the "
                                "recording length");
  if (!band_resolved(band, segment_len, rec.sample_rate))
    throw ResolutionError("band " + band.name + " has no Fourier bin in a " +
                              std::to_string(segment_len) + "-sample segment",
                          minimal_window(band, rec.sample_rate));
  WindowedSeries out;
  out.window_len = window_len;
  const std::size_t n = rec.size() / window_len;
  out.values.resize(n);
  std::vector<double> seg(segment_len);
  for (std::size_t w = 0; w < n; ++w) {
    const double centre = double(w * window_len) + double(window_len) / 2.0;
    const double start = std::clamp(centre - double(segment_len) / 2.0, 0.0,
                                    double(rec.size() - segment_len));
    const auto s = static_cast<std::size_t>(start);
    std::copy_n(rec.lfp.begin() + static_cast<std::ptrdiff_t>(s), segment_len, seg.begin());
    const auto p = periodogram(seg, rec.sample_rate);
    out.values[w] = std::max(detail::band_sum(p, band) * double(window_len) / double(segment_len),
                             kBandPowerFloor);
  }
  return out;
}

/// Spike counts per non-overlapping window; n = floor(N / window_len).
inline WindowedSeries bin_spikes(const RawRecording& rec, std::size_t window_len = 30) {
  if (window_len == 0) throw std::invalid_argument("window length must be positive");
  WindowedSeries out;
  out.window_len = window_len;
  out.support = Support::nonneg_integers;
  const std::size_t n = rec.spikes.size() / window_len;
  out.values.assign(n, 0.0);
  for (std::size_t t = 0; t < n * window_len; ++t) {
    const int s = rec.spikes[t];
    if (s != 0 && s != 1)
      throw std::invalid_argument("spike indicator at sample " + std::to_string(t) +
                                  " is not 0/1");
    out.values[t / window_len] += s;
  }
  return out;
}

struct AlignedPair {
  BivariateSeries series;
  std::vector<std::string> warnings;
};

/// y1 = a (causal), y2 = b (caused), truncated to the common length.
inline AlignedPair align_pair(const WindowedSeries& a, const WindowedSeries& b) {
  if (a.window_len != b.window_len || a.origin != b.origin)
    throw std::invalid_argument("windowing differs: length " + std::to_string(a.window_len) +
                                "/" + std::to_string(b.window_len) + ", origin " +
                                std::to_string(a.origin) + "/" + std::to_string(b.origin));
  AlignedPair out;
  const std::size_t n = std::min(a.values.size(), b.values.size());
  if (a.values.size() != b.values.size())
    out.warnings.push_back("series truncated to the common length " + std::to_string(n) +
                           " (" + std::to_string(a.values.size()) + " vs " +
                           std::to_string(b.values.size()) + ")");
  out.series.y1.assign(a.values.begin(), a.values.begin() + static_cast<std::ptrdiff_t>(n));
  out.series.y2.assign(b.values.begin(), b.values.begin() + static_cast<std::ptrdiff_t>(n));
  out.series.support1 = a.support;
  out.series.support2 = b.support;
  return out;
}

}  // namespace grangerglm
