#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "voicecorpus/audio.hpp"
#include "voicecorpus/error.hpp"

using namespace vc;

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::ofstream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>(v >> 8));
}

// Hand-rolled 16-bit PCM writer, independent of write_wav.
void raw_wav(const std::filesystem::path& path, int channels, int rate, const std::vector<std::int16_t>& interleaved,
             std::uint32_t declared_bytes = 0) {
  std::ofstream out(path, std::ios::binary);
  const std::uint32_t data = declared_bytes ? declared_bytes : static_cast<std::uint32_t>(interleaved.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data);
  for (auto s : interleaved) put_u16(out, static_cast<std::uint16_t>(s));
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("wav: one second mono") {
  testing::TempDir dir("wav");
  raw_wav(dir / "a.wav", 1, 16000, std::vector<std::int16_t>(16000, 1000));
  const AudioClip c = load_wav(dir / "a.wav");
  CHECK(c.sample_rate == 16000);
  CHECK(c.samples.size() == 16000);
  CHECK(c.duration_seconds() == doctest::Approx(1.0));
  CHECK(c.samples[5] == doctest::Approx(1000.0 / 32768.0));
  const WavInfo info = probe_wav(dir / "a.wav");
  CHECK(info.channels == 1);
  CHECK(info.bits_per_sample == 16);
  CHECK(info.frame_count == 16000);
}

TEST_CASE("wav: opposite stereo channels average to zero") {
  testing::TempDir dir("wav");
  std::vector<std::int16_t> data;
  for (int i = 0; i < 800; ++i) {
    data.push_back(16384);
    data.push_back(-16384);
  }
  raw_wav(dir / "s.wav", 2, 16000, data);
  const AudioClip c = load_wav(dir / "s.wav");
  REQUIRE(c.samples.size() == 800);
  for (float x : c.samples) CHECK(x == 0.0f);
}

TEST_CASE("wav: errors") {
  testing::TempDir dir("wav");
  CHECK(kind_of([&] { load_wav(dir / "missing.wav"); }) == ErrorKind::Io);
  raw_wav(dir / "t.wav", 1, 16000, std::vector<std::int16_t>(100, 0), 4000);
  CHECK(kind_of([&] { load_wav(dir / "t.wav"); }) == ErrorKind::Truncated);
  {
    std::ofstream out(dir / "x.wav", std::ios::binary);
    out << "ID3 this is not a wave file at all, just text padding it out";
  }
  CHECK(kind_of([&] { load_wav(dir / "x.wav"); }) == ErrorKind::Format);
}

TEST_CASE("wav: write then read keeps 16-bit precision") {
  testing::TempDir dir("wav");
  const AudioClip src = testing::sine(440.0, 0.25, 0.7);
  write_wav(dir / "o.wav", src);
  const AudioClip back = load_wav(dir / "o.wav");
  REQUIRE(back.samples.size() == src.samples.size());
  for (std::size_t i = 0; i < src.samples.size(); ++i) CHECK(std::abs(back.samples[i] - src.samples[i]) <= 1.0 / 32767.0);
}

TEST_CASE("resample") {
  const AudioClip one = testing::sine(100.0, 1.0);
  SUBCASE("same rate is identity") {
    const AudioClip same = resample(one, 16000);
    CHECK(same.samples == one.samples);
  }
  SUBCASE("duration preserved and sine shape kept") {
    const AudioClip half = resample(one, 8000);
    CHECK(half.sample_rate == 8000);
    CHECK(std::abs(static_cast<long>(half.samples.size()) - 8000) <= 1);
    const AudioClip expect = testing::sine(100.0, 1.0, 0.5, 8000);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < std::min(half.samples.size(), expect.samples.size()); ++i) {
      sxy += half.samples[i] * expect.samples[i];
      sxx += half.samples[i] * half.samples[i];
      syy += expect.samples[i] * expect.samples[i];
    }
    CHECK(sxy / std::sqrt(sxx * syy) > 0.99);
  }
}

TEST_CASE("power_normalize") {
  SUBCASE("full-scale sine to -26 dBFS") {
    const AudioClip s = testing::sine(440.0, 1.0, 1.0);
    const NormalizeResult r = power_normalize(s, -26.0);
    CHECK(r.gain == doctest::Approx(std::pow(10.0, (-26.0 + 3.0103) / 20.0)).epsilon(1e-3));
    CHECK(r.gain == doctest::Approx(0.0709).epsilon(1e-2));
    CHECK_FALSE(r.clip_limited);
  }
  SUBCASE("already at target") {
    const AudioClip s = testing::sine(440.0, 1.0, std::sqrt(2.0) * std::pow(10.0, -26.0 / 20.0));
    CHECK(power_normalize(s, -26.0).gain == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("silence is an error") {
    AudioClip z;
    z.samples.assign(16000, 0.0f);
    CHECK(kind_of([&] { power_normalize(z); }) == ErrorKind::Invalid);
  }
  SUBCASE("peak limit") {
    AudioClip s = testing::sine(440.0, 1.0, 0.001);
    s.samples[100] = 0.5f;
    const NormalizeResult r = power_normalize(s, -3.0);
    CHECK(r.clip_limited);
    float peak = 0;
    for (float x : r.clip.samples) peak = std::max(peak, std::abs(x));
    CHECK(peak == doctest::Approx(kClipPeakLimit).epsilon(1e-4));
  }
}

TEST_CASE("energy_vad") {
  SUBCASE("steady tone is active everywhere") {
    const auto mask = energy_vad(testing::sine(300.0, 1.0));
    CHECK(mask.size() == 100);
    for (bool b : mask) CHECK(b);
  }
  SUBCASE("tone then silence") {
    AudioClip c = testing::sine(300.0, 0.5);
    c.samples.resize(16000, 0.0f);
    const auto mask = energy_vad(c);
    for (std::size_t f = 0; f < mask.size(); ++f) {
      if (f < 49) CHECK(mask[f]);
      if (f > 51) CHECK_FALSE(mask[f]);
    }
  }
  SUBCASE("zeros are inactive") {
    AudioClip z;
    z.samples.assign(8000, 0.0f);
    for (bool b : energy_vad(z)) CHECK_FALSE(b);
  }
}

TEST_CASE("slice_seconds rounds to samples") {
  const AudioClip c = testing::sine(100.0, 1.0);
  const AudioClip s = slice_seconds(c, 0.25, 0.5);
  CHECK(s.samples.size() == 4000);
  CHECK(s.samples.front() == c.samples[4000]);
  CHECK(slice(c, 15990, 20000).samples.size() == 10);
}
