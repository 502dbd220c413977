#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "voicecorpus/audio.hpp"
#include "voicecorpus/features.hpp"
#include "voicecorpus/textnorm.hpp"

namespace vc {

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};

// One diagonal Gaussian per phone over MFCC space.
class PhoneModelSet {
 public:
  double variance_floor = 1e-3;
  std::map<std::string, DiagGaussian> phones;
  DiagGaussian global;  // fallback for phones never observed

  const DiagGaussian& model(const std::string& phone) const;

  // Negative log-likelihood of one frame under the phone's model.
  double frame_cost(const std::string& phone, std::span<const double> frame) const;
};

struct PhoneSegment {
  std::string phone;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // exclusive
  double cost = 0.0;

  std::size_t length() const noexcept { return end_frame - start_frame; }
  double average_cost() const noexcept { return length() ? cost / static_cast<double>(length()) : 0.0; }
};

struct Segmentation {
  std::vector<PhoneSegment> segments;
  double total_cost = 0.0;
  // For each input position, the index into `segments`, or npos when an
  // optional position was skipped.
  std::vector<std::size_t> position_segment;
};

inline constexpr std::size_t kDefaultMinDuration = 3;
inline constexpr double kDefaultVarianceFloor = 1e-3;

// Equal split with the remainder handed out one frame at a time from the
// left. Throws Error{Infeasible} when frame_count < phones * min_duration.
Segmentation flat_segment(std::span<const std::string> phones, std::size_t frame_count,
                          std::size_t min_duration = kDefaultMinDuration);

// Pooled per-phone mean/variance over assigned frames, variance floored.
PhoneModelSet estimate_models(const FeatureTrack& features, const Segmentation& segmentation,
                              double variance_floor = kDefaultVarianceFloor);

// Recomputes segment and total costs of `segmentation` under `models`.
void score_segmentation(const FeatureTrack& features, const PhoneModelSet& models, Segmentation& segmentation);

struct PhoneSlot {
  std::string phone;
  bool optional = false;  // may be skipped at no cost (inter-verse pause)
};

// Minimum summed frame cost over all monotone segmentations in which every
// segment has at least `min_duration` frames. Ties resolve toward the earlier
// start of each phone, working back from the last one.
// Throws Error{Infeasible} when the track is too short.
Segmentation viterbi_segment(const FeatureTrack& features, std::span<const PhoneSlot> slots,
                             const PhoneModelSet& models, std::size_t min_duration = kDefaultMinDuration);
Segmentation viterbi_segment(const FeatureTrack& features, std::span<const std::string> phones,
                             const PhoneModelSet& models, std::size_t min_duration = kDefaultMinDuration);

// Nearest inactive frame within +/- window (ties go left); unchanged if none.
std::size_t snap_to_silence(std::size_t boundary_frame, const std::vector<bool>& vad_mask,
                            std::size_t window_frames = 20);

struct Verse {
  std::string id;
  std::string text;  // normalized
};

struct TimedPhone {
  std::string phone;
  double start = 0.0;
  double end = 0.0;
};

struct UtteranceAlignment {
  std::string verse_id;
  std::string text;
  double start_time = 0.0;
  double end_time = 0.0;
  double score = 0.0;  // mean frame cost, lower is better
  std::vector<TimedPhone> phones;  // chapter-relative times
};

struct ChapterAlignment {
  std::vector<UtteranceAlignment> utterances;
  int iterations = 0;
  bool converged = false;
  // Total cost after the flat start, then after every Viterbi pass.
  std::vector<double> iteration_costs;
  Segmentation segmentation;
};

struct AlignerConfig {
  MfccConfig mfcc;
  std::size_t min_duration = kDefaultMinDuration;
  double variance_floor = kDefaultVarianceFloor;
  int max_iterations = 10;
  double convergence_epsilon = 0.5;  // mean absolute boundary movement, frames
  bool insert_pauses = true;
  // Start from verse spans found in the frame energies (two-class split,
  // longest interior pauses) with a flat split inside each verse. Falls back
  // to a plain flat start when the energies show no usable pauses.
  bool energy_start = true;
  std::string pause_phone = "sil";
  std::size_t snap_window = 20;
  double vad_threshold_db = kDefaultVadThresholdDb;
};

// Iterative segmental k-means over the chapter's phone sequence (initial
// segmentation, then estimate/realign until boundaries settle), followed by
// silence snapping at verse junctions.
ChapterAlignment align_chapter(const AudioClip& audio, std::span<const Verse> verses, const G2pTable& table,
                               const AlignerConfig& config = {});

struct ChapterInput {
  const AudioClip* audio = nullptr;
  std::vector<Verse> verses;
};

// Aligns chapters independently; with `pool_models` a second pass estimates
// models over all chapters and realigns each chapter once with them.
std::vector<ChapterAlignment> align_corpus(std::span<const ChapterInput> chapters, const G2pTable& table,
                                           const AlignerConfig& config, bool pool_models, unsigned jobs = 1);

// Keeps the ceil(n * keep_fraction) lowest-score utterances, in time order.
ChapterAlignment filter_by_score(const ChapterAlignment& alignment, double keep_fraction);

}  // namespace vc
