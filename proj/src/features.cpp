#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "voicecorpus/error.hpp"
#include "voicecorpus/features.hpp"

namespace vc {
namespace {

constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

// FFTW's planner is not thread-safe; executing an existing plan on new arrays
// is. Plans are created once per size and kept for the process lifetime.
class RealFft {
 public:
  explicit RealFft(std::size_t size) : size_(size) {
    static std::mutex planner_mutex;
    std::scoped_lock lock(planner_mutex);
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(size));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(size / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size), in.get(), out.get(), FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return size_; }

  // Power spectrum |X_k|^2 for k = 0..size/2.
  void power_spectrum(std::span<const double> frame, std::span<double> power) const {
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(size_));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(size_ / 2 + 1));
    std::fill_n(in.get(), size_, 0.0);
    std::copy(frame.begin(), frame.end(), in.get());
    fftw_execute_dft_r2c(plan_, in.get(), out.get());
    for (std::size_t k = 0; k <= size_ / 2; ++k) {
      power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
    }
  }

  static const RealFft& for_size(std::size_t size) {
    static std::mutex cache_mutex;
    static std::vector<std::unique_ptr<RealFft>> cache;
    std::scoped_lock lock(cache_mutex);
    for (const auto& fft : cache) {
      if (fft->size() == size) return *fft;
    }
    cache.push_back(std::make_unique<RealFft>(size));
    return *cache.back();
  }

 private:
  std::size_t size_;
  fftw_plan plan_ = nullptr;
};

std::vector<double> make_window(WindowType type, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / denom;
    switch (type) {
      case WindowType::Hann: w[i] = 0.5 - 0.5 * std::cos(phase); break;
      case WindowType::Hamming: w[i] = 0.54 - 0.46 * std::cos(phase); break;
      case WindowType::Rectangular: break;
    }
  }
  return w;
}

// Triangular filters, one row of fft_bins weights per filter.
std::vector<std::vector<double>> mel_filterbank(const MfccConfig& config, int sample_rate, std::size_t fft_size) {
  const double nyquist = sample_rate / 2.0;
  const double high = config.max_frequency_hz > 0.0 ? std::min(config.max_frequency_hz, nyquist) : nyquist;
  const double mel_lo = hz_to_mel(config.min_frequency_hz);
  const double mel_hi = hz_to_mel(high);
  const int m = config.num_mel_filters;
  std::vector<double> centers(static_cast<std::size_t>(m) + 2);
  for (int i = 0; i < m + 2; ++i) {
    centers[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (m + 1));
  }
  const std::size_t bins = fft_size / 2 + 1;
  std::vector<std::vector<double>> bank(static_cast<std::size_t>(m), std::vector<double>(bins, 0.0));
  for (int f = 0; f < m; ++f) {
    const double left = centers[static_cast<std::size_t>(f)];
    const double center = centers[static_cast<std::size_t>(f) + 1];
    const double right = centers[static_cast<std::size_t>(f) + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double weight = 0.0;
      if (hz > left && hz <= center) weight = (hz - left) / (center - left);
      else if (hz > center && hz < right) weight = (right - hz) / (right - center);
      bank[static_cast<std::size_t>(f)][k] = weight;
    }
  }
  return bank;
}

}  // namespace

void FeatureTrack::push_frame(std::span<const double> frame) {
  if (dim == 0 && values.empty()) dim = frame.size();
  if (frame.size() != dim) throw Error(ErrorKind::Invalid, "feature frame dimension mismatch");
  values.insert(values.end(), frame.begin(), frame.end());
}

FeatureTrack FeatureTrack::from_rows(const std::vector<std::vector<double>>& rows, bool includes_c0) {
  FeatureTrack track;
  track.includes_c0 = includes_c0;
  for (const auto& row : rows) track.push_frame(row);
  return track;
}

void MfccConfig::validate() const {
  if (num_coefficients < 1) throw Error(ErrorKind::Invalid, "mfcc: need at least one cepstral coefficient");
  if (num_mel_filters < 2) throw Error(ErrorKind::Invalid, "mfcc: need at least two mel filters");
  if (static_cast<int>(dim()) > num_mel_filters) {
    throw Error(ErrorKind::Invalid, "mfcc: more cepstral coefficients than mel filters");
  }
  if (frame_length_ms <= 0.0 || frame_shift_ms <= 0.0 || frame_shift_ms > frame_length_ms) {
    throw Error(ErrorKind::Invalid, "mfcc: require 0 < frame shift <= frame length");
  }
  if (pre_emphasis < 0.0 || pre_emphasis >= 1.0) throw Error(ErrorKind::Invalid, "mfcc: pre-emphasis must be in [0, 1)");
  if (min_frequency_hz < 0.0 || (max_frequency_hz > 0.0 && max_frequency_hz <= min_frequency_hz)) {
    throw Error(ErrorKind::Invalid, "mfcc: invalid filterbank frequency range");
  }
}

std::size_t frame_length_samples(const MfccConfig& config, int sample_rate) {
  return static_cast<std::size_t>(std::lround(sample_rate * config.frame_length_ms / 1000.0));
}

std::size_t frame_shift_samples(const MfccConfig& config, int sample_rate) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(sample_rate * config.frame_shift_ms / 1000.0)));
}

std::size_t mfcc_frame_count(std::size_t sample_count, const MfccConfig& config, int sample_rate) {
  const std::size_t len = frame_length_samples(config, sample_rate);
  if (len == 0 || sample_count < len) return 0;
  return (sample_count - len) / frame_shift_samples(config, sample_rate) + 1;
}

FeatureTrack mfcc(const AudioClip& clip, const MfccConfig& config) {
  config.validate();
  const std::size_t frame_len = frame_length_samples(config, clip.sample_rate);
  const std::size_t hop = frame_shift_samples(config, clip.sample_rate);
  const std::size_t frames = mfcc_frame_count(clip.samples.size(), config, clip.sample_rate);
  if (frames == 0) {
    throw Error(ErrorKind::Range, "mfcc: clip of " + std::to_string(clip.samples.size()) +
                                      " samples is shorter than one frame (" + std::to_string(frame_len) + ")");
  }

  std::vector<double> emphasized(clip.samples.size());
  emphasized[0] = clip.samples[0];
  for (std::size_t i = 1; i < clip.samples.size(); ++i) {
    emphasized[i] = clip.samples[i] - config.pre_emphasis * clip.samples[i - 1];
  }

  const std::size_t fft_size = next_pow2(frame_len);
  const RealFft& fft = RealFft::for_size(fft_size);
  const auto window = make_window(config.window, frame_len);
  const auto bank = mel_filterbank(config, clip.sample_rate, fft_size);
  const auto filters = static_cast<std::size_t>(config.num_mel_filters);
  const std::size_t first = config.include_c0 ? 0 : 1;
  const std::size_t dim = config.dim();

  // Orthonormal DCT-II rows for the retained coefficients.
  std::vector<std::vector<double>> dct(dim, std::vector<double>(filters));
  for (std::size_t r = 0; r < dim; ++r) {
    const std::size_t k = first + r;
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(filters));
    for (std::size_t m = 0; m < filters; ++m) {
      dct[r][m] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (m + 0.5) / static_cast<double>(filters));
    }
  }

  FeatureTrack track;
  track.dim = dim;
  track.frame_length_ms = config.frame_length_ms;
  track.frame_shift_ms = config.frame_shift_ms;
  track.includes_c0 = config.include_c0;
  track.values.resize(frames * dim);

  std::vector<double> buffer(frame_len);
  std::vector<double> power(fft_size / 2 + 1);
  std::vector<double> log_mel(filters);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t offset = f * hop;
    for (std::size_t i = 0; i < frame_len; ++i) buffer[i] = emphasized[offset + i] * window[i];
    fft.power_spectrum(buffer, power);
    for (std::size_t m = 0; m < filters; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) energy += bank[m][k] * power[k];
      log_mel[m] = std::log(std::max(energy, kLogFloor));
    }
    auto out = track.frame(f);
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t m = 0; m < filters; ++m) acc += dct[r][m] * log_mel[m];
      out[r] = acc;
    }
  }
  return track;
}

}  // namespace vc
