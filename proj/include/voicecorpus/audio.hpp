#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace vc {

// Mono PCM waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_seconds() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  bool empty() const noexcept { return samples.empty(); }
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::size_t frame_count = 0;

  double duration_seconds() const noexcept {
    return sample_rate > 0 ? static_cast<double>(frame_count) / sample_rate : 0.0;
  }
};

// Reads RIFF/WAVE PCM (8/16/24/32-bit integer, 32/64-bit float), mono or
// stereo. Stereo is averaged down to mono.
// Throws Error{Io} for a missing file, Error{Format} for anything that is not
// a supported PCM WAV, Error{Truncated} when the payload is shorter than the
// header says.
AudioClip load_wav(const std::filesystem::path& path);

// Header-only probe; same error behaviour as load_wav.
WavInfo probe_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Sub-clip [begin, end) in samples, clamped to the clip.
AudioClip slice(const AudioClip& clip, std::size_t begin, std::size_t end);

// Sub-clip between two times in seconds (rounded to the nearest sample).
AudioClip slice_seconds(const AudioClip& clip, double start, double end);

enum class ResampleMethod { WindowedSinc, Linear };

// Output length is round(n * target / source); duration is preserved to
// within one output sample period.
AudioClip resample(const AudioClip& clip, int target_rate,
                   ResampleMethod method = ResampleMethod::WindowedSinc);

inline constexpr double kDefaultVadShiftMs = 10.0;
inline constexpr double kDefaultVadThresholdDb = 30.0;

// One flag per non-overlapping frame of `frame_shift_ms` (the last frame may
// be partial). A frame is active iff its log energy exceeds the loudest frame
// minus the threshold; frames below -100 dBFS are never active.
std::vector<bool> energy_vad(const AudioClip& clip,
                             double frame_shift_ms = kDefaultVadShiftMs,
                             double threshold_db_below_peak = kDefaultVadThresholdDb);

// RMS in dBFS (20 log10 rms) over the frames energy_vad marks active.
// Throws Error{Invalid} when no frame is active.
double active_rms_dbfs(const AudioClip& clip);

struct NormalizeResult {
  AudioClip clip;
  double gain = 1.0;
  bool clip_limited = false;
};

inline constexpr double kDefaultTargetDbfs = -26.0;
inline constexpr double kClipPeakLimit = 0.99;

// Scales the clip so its active-frame RMS equals the target level. When that
// gain would push the peak above 0.99 the gain is reduced to reach exactly
// that peak and `clip_limited` is set.
NormalizeResult power_normalize(const AudioClip& clip, double target_level_dbfs = kDefaultTargetDbfs);

}  // namespace vc
