#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "voicecorpus/audio.hpp"

namespace vc {

// Row-major frame_count x dim matrix of cepstral coefficients.
struct FeatureTrack {
  std::size_t dim = 0;
  std::vector<double> values;
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;
  bool includes_c0 = true;

  std::size_t frame_count() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  bool empty() const noexcept { return frame_count() == 0; }

  std::span<const double> frame(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
  std::span<double> frame(std::size_t i) noexcept { return {values.data() + i * dim, dim}; }

  void push_frame(std::span<const double> frame);

  // Builds a track from explicit rows (all rows must share one length).
  static FeatureTrack from_rows(const std::vector<std::vector<double>>& rows, bool includes_c0 = false);
};

enum class WindowType { Hann, Hamming, Rectangular };

struct MfccConfig {
  int num_coefficients = 24;  // c1..cN
  bool include_c0 = true;     // prepend c0 (log-energy-like term)
  int num_mel_filters = 26;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double pre_emphasis = 0.97;
  WindowType window = WindowType::Hann;
  double min_frequency_hz = 0.0;
  double max_frequency_hz = 0.0;  // 0 selects the Nyquist frequency

  std::size_t dim() const noexcept { return static_cast<std::size_t>(num_coefficients) + (include_c0 ? 1 : 0); }

  // Throws Error{Invalid} on inconsistent settings.
  void validate() const;
};

std::size_t frame_length_samples(const MfccConfig& config, int sample_rate);
std::size_t frame_shift_samples(const MfccConfig& config, int sample_rate);

// floor((n - frame_len) / hop) + 1, or 0 when n < frame_len.
std::size_t mfcc_frame_count(std::size_t sample_count, const MfccConfig& config, int sample_rate);

// Pre-emphasis, windowing, power spectrum, triangular mel filterbank, natural
// log and orthonormal DCT-II. Throws Error{Range} for a clip shorter than one
// frame.
FeatureTrack mfcc(const AudioClip& clip, const MfccConfig& config = {});

}  // namespace vc
