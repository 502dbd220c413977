#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voicecorpus/audio.hpp"
#include "voicecorpus/corpus.hpp"
#include "voicecorpus/features.hpp"
#include "voicecorpus/textnorm.hpp"

namespace vc {

// A stretch of one training utterance. Diphone units run from the middle of
// one phone to the middle of the next; half-phone units cover the first or
// second half of a single phone and serve as backoff.
struct Unit {
  std::string utterance_id;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;  // exclusive
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;   // exclusive
  std::vector<double> left_mfcc;
  std::vector<double> right_mfcc;

  std::size_t sample_count() const noexcept { return end_sample - start_sample; }
};

enum class UnitKind { Diphone, FirstHalf, SecondHalf };

struct UnitIndex {
  static constexpr int kVersion = 1;

  int sample_rate = 16000;
  std::size_t feature_dim = 0;
  std::size_t hop_samples = 160;
  std::string language;
  std::string license;
  std::map<std::string, std::vector<Unit>> diphones;     // "a-b"
  std::map<std::string, std::vector<Unit>> first_halves;   // phone -> units
  std::map<std::string, std::vector<Unit>> second_halves;  // phone -> units
  std::map<std::string, double> duration_means;            // phone -> frames
  std::map<std::string, std::string> audio_paths;          // utterance id -> wav, relative to the index file

  std::size_t diphone_unit_count() const noexcept;
  const std::vector<Unit>* find(UnitKind kind, const std::string& label) const noexcept;
};

struct IndexInput {
  std::string id;
  const AudioClip* audio = nullptr;
  std::vector<TimedPhone> phones;  // times relative to the clip
};

// Zero-length phones are dropped before units are cut.
UnitIndex build_unit_index(const std::vector<IndexInput>& inputs, const MfccConfig& mfcc_config = {});

// Every manifest entry needs a phone alignment (Error{NotFound} otherwise).
// Audio paths are resolved against `base_dir`; the stored paths are made
// relative to `index_dir`.
UnitIndex build_unit_index(const Manifest& manifest, const PhoneAlignments& phones,
                           const std::filesystem::path& base_dir, const std::filesystem::path& index_dir,
                           const MfccConfig& mfcc_config = {}, unsigned jobs = 1);

void save_unit_index(const std::filesystem::path& path, const UnitIndex& index);
UnitIndex load_unit_index(const std::filesystem::path& path);

// An index plus the waveforms its units point into.
struct Voice {
  UnitIndex index;
  std::map<std::string, AudioClip> audio;
};

Voice load_voice(const std::filesystem::path& index_path);

struct SynthOptions {
  double join_weight = 1.0;
  double target_weight = 0.2;
  double crossfade_ms = 10.0;
  bool pad_silence = true;  // only when the voice has pause units
  std::string pause_phone = "sil";
};

struct ChosenUnit {
  UnitKind kind = UnitKind::Diphone;
  std::string label;
  std::size_t candidate = 0;  // position in the index's list for `label`
  double target_cost = 0.0;
  double join_cost = 0.0;     // cost of the join into this unit from the previous one
};

struct PlanPosition {
  std::string target;  // diphone label, or a phone for the edge half-units
  UnitKind kind = UnitKind::Diphone;
  bool backoff = false;  // diphone replaced by second half + first half
  std::vector<ChosenUnit> units;
};

struct SynthPlan {
  std::vector<std::string> phones;
  std::vector<PlanPosition> positions;
  double total_cost = 0.0;
};

// Target positions for phones p1..pn: first half of p1, the diphones
// p1-p2 .. p(n-1)-pn, second half of pn. Diphones missing from the index back
// off to half-phones. Throws Error{Invalid} for an empty phone list and
// Error{Infeasible} naming what the index lacks.
SynthPlan plan_units(const std::vector<std::string>& phones, const UnitIndex& index, const SynthOptions& options = {});

// Concatenates the planned units with raised-cosine cross-fades. Units that
// were adjacent in the source audio are reconstructed exactly.
AudioClip render_plan(const SynthPlan& plan, const Voice& voice, const SynthOptions& options = {});

struct SynthOutput {
  AudioClip audio;
  SynthPlan plan;
};

SynthOutput synthesize_phones(std::vector<std::string> phones, const Voice& voice, const SynthOptions& options = {});
SynthOutput synthesize(std::string_view text, const G2pTable& table, const Voice& voice,
                       const SynthOptions& options = {});

struct Prompt {
  std::string id;
  std::string text;
};

struct BatchResult {
  Manifest manifest;
  std::vector<std::pair<std::string, std::string>> failures;  // id, message
};

// Writes `<id>.wav` into out_dir for every prompt that synthesizes; failures
// are collected and the batch carries on.
BatchResult batch_synthesize(const std::vector<Prompt>& prompts, const G2pTable& table, const Voice& voice,
                             const std::filesystem::path& out_dir, const SynthOptions& options = {},
                             unsigned jobs = 1);

}  // namespace vc
