#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "voicecorpus/audio.hpp"
#include "voicecorpus/error.hpp"

namespace vc {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::Io, "no such audio file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open audio file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ParsedWav {
  WavInfo info;
  std::uint16_t format = 0;
  std::size_t block_align = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_bytes = 0;
};

ParsedWav parse(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  const std::size_t size = bytes.size();
  const bool riff_magic = size >= 4 && std::memcmp(bytes.data(), "RIFF", 4) == 0;
  if (!riff_magic) throw Error(ErrorKind::Format, name + ": not a RIFF file");
  if (size < 12) throw Error(ErrorKind::Truncated, name + ": truncated RIFF header");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::Format, name + ": RIFF container is not WAVE");
  }

  ParsedWav wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t declared = read_u32(chunk + 4);
    const std::size_t available = size - pos - 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (declared > available || declared < 16) {
        throw Error(ErrorKind::Truncated, name + ": truncated fmt chunk");
      }
      wav.format = read_u16(chunk + 8);
      wav.info.channels = read_u16(chunk + 10);
      wav.info.sample_rate = static_cast<int>(read_u32(chunk + 12));
      wav.block_align = read_u16(chunk + 20);
      wav.info.bits_per_sample = read_u16(chunk + 22);
      if (wav.format == kFormatExtensible) {
        if (declared < 40) throw Error(ErrorKind::Format, name + ": malformed extensible fmt chunk");
        wav.format = read_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Streaming writers sometimes leave the size as 0xFFFFFFFF.
      std::size_t data_bytes = declared == 0xFFFFFFFFu ? available : declared;
      if (data_bytes > available) {
        throw Error(ErrorKind::Truncated, name + ": data chunk declares " + std::to_string(declared) +
                                              " bytes but only " + std::to_string(available) +
                                              " are present");
      }
      wav.data = chunk + 8;
      wav.data_bytes = data_bytes;
      break;
    }
    pos += 8 + static_cast<std::size_t>(declared) + (declared & 1u);
  }

  if (!have_fmt) {
    if (wav.data == nullptr) throw Error(ErrorKind::Truncated, name + ": missing fmt and data chunks");
    throw Error(ErrorKind::Format, name + ": missing fmt chunk");
  }
  if (wav.data == nullptr) throw Error(ErrorKind::Truncated, name + ": missing data chunk");

  if (wav.format != kFormatPcm && wav.format != kFormatFloat) {
    throw Error(ErrorKind::Format, name + ": unsupported codec (format tag " + std::to_string(wav.format) + ")");
  }
  const int bits = wav.info.bits_per_sample;
  const bool int_ok = wav.format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = wav.format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok) {
    throw Error(ErrorKind::Format, name + ": unsupported sample format (" + std::to_string(bits) + " bits)");
  }
  if (wav.info.channels != 1 && wav.info.channels != 2) {
    throw Error(ErrorKind::Format, name + ": unsupported channel count " + std::to_string(wav.info.channels));
  }
  if (wav.info.sample_rate <= 0) throw Error(ErrorKind::Format, name + ": invalid sample rate");
  const std::size_t expected_align = static_cast<std::size_t>(wav.info.channels) * (bits / 8);
  if (wav.block_align != expected_align) {
    throw Error(ErrorKind::Format, name + ": inconsistent block alignment");
  }
  wav.info.is_float = wav.format == kFormatFloat;
  wav.info.frame_count = wav.data_bytes / wav.block_align;
  return wav;
}

double decode_sample(const std::uint8_t* p, const ParsedWav& wav) {
  switch (wav.info.bits_per_sample) {
    case 8:
      return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32:
      if (wav.info.is_float) return std::bit_cast<float>(read_u32(p));
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    case 64: {
      std::uint64_t bits = static_cast<std::uint64_t>(read_u32(p)) |
                           (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
      return std::bit_cast<double>(bits);
    }
  }
  return 0.0;
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  return parse(read_file(path), path.string()).info;
}

AudioClip load_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const ParsedWav wav = parse(bytes, path.string());
  const std::size_t bytes_per_sample = static_cast<std::size_t>(wav.info.bits_per_sample) / 8;

  AudioClip clip;
  clip.sample_rate = wav.info.sample_rate;
  clip.samples.resize(wav.info.frame_count);
  for (std::size_t frame = 0; frame < wav.info.frame_count; ++frame) {
    const std::uint8_t* base = wav.data + frame * wav.block_align;
    double sum = 0.0;
    for (int ch = 0; ch < wav.info.channels; ++ch) {
      const double v = decode_sample(base + ch * bytes_per_sample, wav);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::Format, path.string() + ": non-finite sample at frame " + std::to_string(frame));
      }
      sum += v;
    }
    clip.samples[frame] = static_cast<float>(std::clamp(sum / wav.info.channels, -1.0, 1.0));
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw Error(ErrorKind::Invalid, "write_wav: invalid sample rate");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : clip.samples) {
    const double scaled = std::round(static_cast<double>(s) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::Io, "cannot write audio file: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorKind::Io, "short write: " + path.string());
}

}  // namespace vc
