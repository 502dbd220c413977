#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voicecorpus/aligner.hpp"
#include "voicecorpus/audio.hpp"

namespace vc {

// Manifest file format (UTF-8):
//
//   #language: luo
//   #source: found/open.bible
//   #license: CC-BY-SA-4.0
//   id<TAB>audio_path<TAB>start<TAB>end<TAB>speaker<TAB>text[<TAB>score]
//
// Audio paths are relative to the manifest's directory. start = end = 0
// means "the whole file".

struct Utterance {
  std::string id;
  std::string audio_path;
  double start = 0.0;
  double end = 0.0;
  std::string speaker;
  std::string text;
  std::optional<double> score;

  bool whole_file() const noexcept { return start == 0.0 && end == 0.0; }
  double duration() const noexcept { return end - start; }
};

struct Manifest {
  std::string language;
  std::string source;
  std::string license;
  std::vector<Utterance> utterances;

  double total_duration() const noexcept;
  const Utterance* find(const std::string& id) const noexcept;
};

Manifest parse_manifest(std::istream& in, const std::string& source_name);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const Manifest& manifest);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Replaces whole-file entries' end time with the WAV duration.
void resolve_durations(Manifest& manifest, const std::filesystem::path& base_dir);

// Audio for one utterance (whole file or its [start, end) region).
AudioClip load_utterance_audio(const Utterance& utt, const std::filesystem::path& base_dir);

bool is_filesystem_safe_id(const std::string& id) noexcept;

struct Violation {
  std::size_t index = 0;  // utterance index; npos for manifest-level findings
  std::string utterance_id;
  std::string kind;  // duplicate-id, unsafe-id, missing-audio, bad-duration, digits, empty-text, no-license
  std::string message;
};

// Structural checks; findings are data, not errors.
std::vector<Violation> validate(const Manifest& manifest, const std::filesystem::path& base_dir);

struct CorpusStats {
  std::size_t utterance_count = 0;
  double total_seconds = 0.0;
  std::optional<double> mean_seconds;  // empty for an empty manifest

  double total_hours() const noexcept { return total_seconds / 3600.0; }
};

CorpusStats stats(const Manifest& manifest);

// Phone timings per utterance, file format `id<TAB>phone<TAB>start<TAB>end`.
using PhoneAlignments = std::map<std::string, std::vector<TimedPhone>>;
PhoneAlignments read_phone_alignments(const std::filesystem::path& path);
void write_phone_alignments(const std::filesystem::path& path, const PhoneAlignments& phones,
                            const std::vector<std::string>& order = {});

struct CutOptions {
  std::string id_prefix;  // utterance id = prefix + verse id
  std::string speaker = "spk0";
  std::string language;
  std::string source;
  std::string license;
  bool power_normalize = true;
  double target_level_dbfs = kDefaultTargetDbfs;
  std::string pause_phone = "sil";
  unsigned jobs = 1;
};

struct CutResult {
  Manifest manifest;
  PhoneAlignments phones;  // relative to each cut file, padded with pause segments
};

// Writes one 16-bit WAV per utterance into out_dir and returns a manifest
// referencing them (start = 0, end = duration). Throws Error{Range} when an
// utterance lies outside the audio.
CutResult cut_audio(const ChapterAlignment& alignment, const AudioClip& audio, const std::filesystem::path& out_dir,
                    const CutOptions& options);

// Chapter-level manifest (all entries pointing at one audio file) plus phone
// alignments back into the aligner's representation.
ChapterAlignment alignment_from_manifest(const Manifest& manifest, const PhoneAlignments& phones);

struct SplitSpec {
  std::vector<double> minutes{25.0, 50.0, 101.0};
  bool nested = true;
  std::optional<std::uint64_t> seed;  // empty: corpus order
};

// Each split is the shortest prefix (of the chosen order) whose duration
// reaches the target, so it overshoots by less than one utterance.
std::vector<Manifest> make_splits(const Manifest& manifest, const SplitSpec& spec);

// "corpus_25min" for 25 minutes; fractional minutes keep their decimals.
std::string split_suffix(double minutes);

// Deterministic Fisher-Yates permutation (platform independent).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace vc
