#include <algorithm>
#include <cmath>
#include <numbers>

#include "voicecorpus/audio.hpp"
#include "voicecorpus/error.hpp"

namespace vc {
namespace {

// Zero crossings of the sinc kernel on each side, counted at the lower of the
// two rates.
constexpr int kSincHalfZeroCrossings = 16;
constexpr double kSilenceFloorPower = 1e-10;  // -100 dBFS

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

std::size_t vad_hop(const AudioClip& clip, double frame_shift_ms) {
  const auto hop = static_cast<std::size_t>(std::lround(clip.sample_rate * frame_shift_ms / 1000.0));
  return std::max<std::size_t>(hop, 1);
}

std::vector<double> frame_powers(const AudioClip& clip, std::size_t hop) {
  const std::size_t n = clip.samples.size();
  std::vector<double> powers((n + hop - 1) / hop, 0.0);
  for (std::size_t f = 0; f < powers.size(); ++f) {
    const std::size_t begin = f * hop;
    const std::size_t end = std::min(n, begin + hop);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += static_cast<double>(clip.samples[i]) * clip.samples[i];
    powers[f] = sum / static_cast<double>(end - begin);
  }
  return powers;
}

}  // namespace

AudioClip slice(const AudioClip& clip, std::size_t begin, std::size_t end) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  end = std::min(end, clip.samples.size());
  begin = std::min(begin, end);
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

AudioClip slice_seconds(const AudioClip& clip, double start, double end) {
  const auto b = static_cast<std::size_t>(std::max(0.0, std::round(start * clip.sample_rate)));
  const auto e = static_cast<std::size_t>(std::max(0.0, std::round(end * clip.sample_rate)));
  return slice(clip, b, e);
}

AudioClip resample(const AudioClip& clip, int target_rate, ResampleMethod method) {
  if (target_rate <= 0) throw Error(ErrorKind::Invalid, "resample: target rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const std::size_t n = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  if (n == 0) return out;

  if (method == ResampleMethod::Linear) {
    for (std::size_t i = 0; i < out_len; ++i) {
      const double pos = static_cast<double>(i) / ratio;
      const auto k = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(k);
      const double a = clip.samples[std::min(k, n - 1)];
      const double b = clip.samples[std::min(k + 1, n - 1)];
      out.samples[i] = static_cast<float>(a + (b - a) * frac);
    }
    return out;
  }

  // Band-limited interpolation: Hann-windowed sinc whose cutoff is the lower
  // of the two Nyquist frequencies.
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kSincHalfZeroCrossings / cutoff;
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(pos - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(pos + half_width));
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(lo, 0);
         k <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n) - 1); ++k) {
      const double offset = pos - static_cast<double>(k);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * offset / half_width);
      acc += clip.samples[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * offset) * window;
    }
    out.samples[i] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

std::vector<bool> energy_vad(const AudioClip& clip, double frame_shift_ms, double threshold_db_below_peak) {
  if (clip.empty()) return {};
  const auto powers = frame_powers(clip, vad_hop(clip, frame_shift_ms));
  const double peak = *std::max_element(powers.begin(), powers.end());
  std::vector<bool> mask(powers.size(), false);
  if (peak <= kSilenceFloorPower) return mask;
  const double peak_db = 10.0 * std::log10(peak);
  for (std::size_t f = 0; f < powers.size(); ++f) {
    if (powers[f] <= kSilenceFloorPower) continue;
    mask[f] = 10.0 * std::log10(powers[f]) > peak_db - threshold_db_below_peak;
  }
  return mask;
}

double active_rms_dbfs(const AudioClip& clip) {
  const std::size_t hop = vad_hop(clip, kDefaultVadShiftMs);
  const auto mask = energy_vad(clip, kDefaultVadShiftMs, kDefaultVadThresholdDb);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask[f]) continue;
    const std::size_t begin = f * hop;
    const std::size_t end = std::min(clip.samples.size(), begin + hop);
    for (std::size_t i = begin; i < end; ++i) sum += static_cast<double>(clip.samples[i]) * clip.samples[i];
    count += end - begin;
  }
  if (count == 0) throw Error(ErrorKind::Invalid, "recording is silent: no active frames");
  return 10.0 * std::log10(sum / static_cast<double>(count));
}

NormalizeResult power_normalize(const AudioClip& clip, double target_level_dbfs) {
  const double current = active_rms_dbfs(clip);
  double gain = std::pow(10.0, (target_level_dbfs - current) / 20.0);

  float peak = 0.0f;
  for (float s : clip.samples) peak = std::max(peak, std::abs(s));

  NormalizeResult result;
  if (peak * gain > kClipPeakLimit) {
    gain = kClipPeakLimit / peak;
    result.clip_limited = true;
  }
  result.gain = gain;
  result.clip.sample_rate = clip.sample_rate;
  result.clip.samples.resize(clip.samples.size());
  std::transform(clip.samples.begin(), clip.samples.end(), result.clip.samples.begin(),
                 [gain](float s) { return static_cast<float>(s * gain); });
  return result;
}

}  // namespace vc
