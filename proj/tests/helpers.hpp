#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "voicecorpus/audio.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("vc-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline vc::AudioClip sine(double freq, double seconds, double amplitude = 0.5, int rate = 16000) {
  vc::AudioClip c;
  c.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate));
  }
  return c;
}

inline vc::AudioClip noise(double seconds, double sigma, std::uint64_t seed, int rate = 16000) {
  vc::AudioClip c;
  c.sample_rate = rate;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (auto& x : c.samples) x = static_cast<float>(dist(rng));
  return c;
}

}  // namespace testing
