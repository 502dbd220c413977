#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voicecorpus/aligner.hpp"
#include "voicecorpus/audio.hpp"
#include "voicecorpus/textnorm.hpp"

namespace vc {

// Synthetic "chapter" with known ground truth: every phone is a steady
// three-partial tone with its own frequencies, verses are separated by
// pauses, and verse texts carry digits that the bundled number dictionary
// expands.
struct FixtureOptions {
  std::uint64_t seed = 1;
  double target_seconds = 300.0;
  std::size_t verse_count = 0;  // 0: keep adding verses until target_seconds
  std::optional<double> snr_db;  // additive white noise relative to speech power
  int sample_rate = 16000;
  std::size_t min_phone_frames = 6;
  std::size_t max_phone_frames = 15;
  std::size_t min_pause_frames = 25;
  std::size_t max_pause_frames = 45;
  std::size_t edge_pause_frames = 30;
  std::size_t min_words = 3;
  std::size_t max_words = 7;
  double number_probability = 0.3;
  std::size_t prompt_count = 300;
  double noise_floor = 1e-4;
};

struct FixtureVerse {
  std::string id;
  std::string raw_text;  // may contain digits
  std::string text;      // normalized
  std::vector<TimedPhone> phones;
  double start = 0.0;
  double end = 0.0;
};

struct Fixture {
  AudioClip audio;
  std::vector<FixtureVerse> verses;
  G2pTable g2p;
  NumberDictionary numbers;
  std::vector<std::pair<std::string, std::string>> prompts;  // id, text (digit-free)
  std::size_t hop_samples = 160;

  std::vector<Verse> aligner_verses() const;
};

std::string fixture_g2p_text();
std::string fixture_numbers_text();

Fixture make_fixture(const FixtureOptions& options = {});

// chapter.wav, verses.tsv (raw text), g2p.tsv, numbers.tsv, prompts.tsv,
// truth.tsv (verse spans), truth_phones.tsv and voicecorpus.conf.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace vc
