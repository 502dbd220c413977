#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voicecorpus/corpus.hpp"
#include "voicecorpus/features.hpp"

namespace vc {

// ---- Mel cepstral distortion ------------------------------------------------

// (10 / ln 10) * sqrt(2 * sum_d (a_d - b_d)^2) over the given coefficients.
double frame_mcd(std::span<const double> a, std::span<const double> b) noexcept;

struct UtteranceMcd {
  std::string id;
  double mcd = 0.0;
  std::size_t frame_pairs = 0;
};

struct McdResult {
  double mean_mcd = 0.0;
  std::size_t frame_pair_count = 0;
  std::vector<UtteranceMcd> per_utterance;
  bool aligned = true;
  std::vector<std::string> missing_in_reference;
  std::vector<std::string> missing_in_synthesized;
};

// c0 is skipped when the tracks carry it. With `align`, frames are paired
// along the DTW path (local cost = frame MCD); otherwise index-wise over the
// shorter track. Throws Error{Invalid} for empty or mismatched tracks.
McdResult mcd(const FeatureTrack& a, const FeatureTrack& b, bool align = true);

inline constexpr double kMcdSignificance = 0.12;

// True when two systems' MCDs differ by at least the significance step.
bool mcd_difference_significant(double mcd_a, double mcd_b, double threshold = kMcdSignificance) noexcept;

// Per-id DTW-aligned MCD over the ids both manifests share, frame-weighted
// mean. Ids on one side only are listed, not fatal; no shared id is
// Error{Invalid}.
McdResult mcd_testset(const Manifest& reference, const std::filesystem::path& reference_dir,
                      const Manifest& synthesized, const std::filesystem::path& synthesized_dir,
                      const MfccConfig& config = {}, unsigned jobs = 1);

// ---- Character error rate ---------------------------------------------------

struct CerProfile {
  bool nfc = true;
  bool lowercase = true;
  bool collapse_whitespace = true;
  bool strip_punctuation = true;
  // Lenient extras for orthographic variation.
  bool remove_spaces = false;
  bool collapse_doubled_vowels = false;
  bool map_w_to_u = false;

  static CerProfile strict() { return {}; }
  static CerProfile lenient() { return {true, true, true, true, true, true, true}; }
  static CerProfile raw() { return {false, false, false, false, false, false, false}; }
};

std::u32string cer_normalize(std::string_view text, const CerProfile& profile);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

struct CerResult {
  std::size_t distance = 0;
  std::size_t reference_length = 0;
  double cer = 0.0;

  double percent() const noexcept { return cer * 100.0; }
};

// Throws Error{Invalid} when the reference is empty after normalization.
CerResult cer(std::string_view reference, std::string_view hypothesis, const CerProfile& profile = {});

// ---- Preference tests -------------------------------------------------------

enum class PreferenceAnswer { A, B, Same };

struct PreferenceItem {
  std::string id;
  std::string system_1;
  std::string system_2;
};

struct PreferenceResponse {
  std::string evaluator;
  std::string item_id;
  bool first_shown_as_a = true;  // system_1 was played as "A"
  PreferenceAnswer answer = PreferenceAnswer::Same;
};

struct PreferenceRow {
  std::string evaluator;
  std::map<std::string, std::size_t> counts;
  std::size_t same = 0;
  std::size_t total = 0;
};

struct PreferenceTally {
  std::vector<std::string> systems;  // order of first appearance in the items
  std::map<std::string, std::size_t> counts;
  std::size_t same = 0;
  std::size_t responses = 0;
  std::vector<PreferenceRow> evaluators;  // sorted by evaluator
  std::optional<std::string> winner;
  bool tie = false;
};

// Maps every answer back to a system through its presentation order, then
// counts. Throws Error{NotFound} for a response to an unknown item.
PreferenceTally tally_preferences(const std::vector<PreferenceItem>& items,
                                  const std::vector<PreferenceResponse>& responses);

std::string format_preference_table(const PreferenceTally& tally);
std::string format_mcd_table(const McdResult& result);

}  // namespace vc
