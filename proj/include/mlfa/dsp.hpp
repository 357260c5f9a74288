#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"

namespace mlfa::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFrameSamples = 400;  // 25 ms
inline constexpr int kHopSamples = 160;    // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kMaxSeconds = 10;
inline constexpr double kEnergyFloor = 1e-10;
inline constexpr int kDefaultMels = 40;

/// Mono PCM16 audio at a fixed 16 kHz rate.
struct Waveform {
  std::vector<int16_t> samples;
  int sample_rate = kSampleRate;
};

/// Natural-log mel energies, one row per 25 ms frame at a 10 ms hop.
struct LogMelFrames {
  Matrix frames;  // [T_f x n_mels]
  int frame_len_ms = 25;
  int hop_ms = 10;
  int n_mels = kDefaultMels;
};

inline int frame_count(long long n_samples) {
  if (n_samples < kFrameSamples)
    throw AudioTooShort("need at least " + std::to_string(kFrameSamples) + " samples, got " +
                        std::to_string(n_samples));
  return static_cast<int>(1 + (n_samples - kFrameSamples) / kHopSamples);
}

inline double mel_of_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double hz_of_mel(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Center frequency (Hz) of mel bin k when n_mels triangles span 0-8000 Hz.
inline double mel_bin_center_hz(int k, int n_mels) {
  const double mel_hi = mel_of_hz(kSampleRate / 2.0);
  return hz_of_mel(mel_hi * (k + 1) / (n_mels + 1));
}

/// Triangular filterbank over the 257 one-sided FFT bins, HTK-style points
/// equally spaced in mel between 0 and 8000 Hz. weights[m] holds (bin, w).
inline std::vector<std::vector<std::pair<int, double>>> mel_filterbank(int n_mels) {
  const int n_bins = kFftSize / 2 + 1;
  const double mel_hi = mel_of_hz(kSampleRate / 2.0);
  std::vector<double> edges_hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges_hz[i] = hz_of_mel(mel_hi * i / (n_mels + 1));

  std::vector<std::vector<std::pair<int, double>>> weights(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges_hz[m], cen = edges_hz[m + 1], hi = edges_hz[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kFftSize;
      double w = 0.0;
      if (f > lo && f < cen)
        w = (f - lo) / (cen - lo);
      else if (f >= cen && f < hi)
        w = (hi - f) / (hi - cen);
      if (w > 0.0) weights[m].emplace_back(k, w);
    }
  }
  return weights;
}

namespace detail {

/// In-place iterative radix-2 FFT on interleaved (re, im) pairs, n a power of 2.
inline void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const int n = static_cast<int>(re.size());
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.14159265358979323846 / len;
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (int i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (int k = 0; k < len / 2; ++k) {
        const int a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / n);
  return w;
}

}  // namespace detail

/// Raw waveform -> log-mel frames. Hann window, 512-point magnitude spectrum,
/// triangular mel filterbank over 0-8000 Hz, energies floored at 1e-10 before
/// the natural log. Deterministic; the trailing partial frame is dropped.
inline LogMelFrames compute_logmel(const Waveform& w, int n_mels = kDefaultMels) {
  if (w.sample_rate != kSampleRate)
    throw BadSampleRate("expected 16000, got " + std::to_string(w.sample_rate));
  const long long n = static_cast<long long>(w.samples.size());
  if (n > static_cast<long long>(kMaxSeconds) * kSampleRate)
    throw AudioTooLong("duration over " + std::to_string(kMaxSeconds) + " s");
  const int t_f = frame_count(n);

  const auto window = detail::hann_window(kFrameSamples);
  const auto bank = mel_filterbank(n_mels);

  LogMelFrames out;
  out.n_mels = n_mels;
  out.frames = Matrix(t_f, n_mels);
  std::vector<double> re(kFftSize), im(kFftSize);
  for (int t = 0; t < t_f; ++t) {
    const int base = t * kHopSamples;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < kFrameSamples; ++i)
      re[i] = (static_cast<double>(w.samples[base + i]) / 32768.0) * window[i];
    detail::fft_radix2(re, im);
    for (int m = 0; m < n_mels; ++m) {
      double e = 0.0;
      for (const auto& [k, wt] : bank[m]) e += wt * std::hypot(re[k], im[k]);
      out.frames(t, m) = std::log(std::max(e, kEnergyFloor));
    }
  }
  return out;
}

}  // namespace mlfa::dsp
