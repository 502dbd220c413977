#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "voicecorpus/fixture.hpp"

namespace vc {
namespace {

constexpr const char* kG2p =
    "@language fixture\n"
    "a\ta\nb\tb\nc\tc\nd\td\ne\te\ng\tg\ni\ti\nk\tk\nl\tl\nm\tm\nn\tn\no\to\n"
    "p\tp\nr\tr\ns\ts\nt\tt\nu\tu\nw\tw\ny\ty\n"
    "ch\tC\nng\tN\nsh\tS\n";

constexpr const char* kNumbers =
    "@language fixture\n"
    "0\tnul\n1\tku\n2\tari\n3\tadek\n4\tangwen\n5\tabic\n6\tauchiel\n7\tabiriyo\n8\taboro\n9\tochiko\n"
    "10\tapar\n100\tmia\n"
    "@rule scale 10 count-after omit-one\n"
    "@rule scale 100 count-after omit-one\n"
    "@rule join 1 0 \\sgi\\s\n";

const std::vector<std::string> kConsonants{"b", "d", "g", "k", "l", "m", "n", "p", "r",
                                           "s", "t", "w", "y", "ch", "ng", "sh"};
const std::vector<std::string> kVowels{"a", "e", "i", "o", "u"};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t below(std::size_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % n);
  }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::string make_word(Rng& rng) {
  std::string w;
  const std::size_t syllables = rng.between(1, 3);
  if (rng.below(3) == 0) w += kVowels[rng.below(kVowels.size())];
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kConsonants[rng.below(kConsonants.size())];
    w += kVowels[rng.below(kVowels.size())];
  }
  if (rng.below(4) == 0) w += kConsonants[rng.below(9)];
  return w;
}

std::string make_sentence(Rng& rng, const FixtureOptions& o, bool allow_numbers) {
  std::string s;
  const std::size_t words = rng.between(o.min_words, o.max_words);
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    if (allow_numbers && i > 0 && rng.uniform() < o.number_probability / static_cast<double>(words)) {
      s += std::to_string(rng.between(1, 199));
    } else {
      s += make_word(rng);
    }
  }
  return s + ".";
}

struct Tone {
  double freq[3];
  double amp[3];
};

Tone tone_for(std::size_t k) {
  const double level = 0.5 + 0.5 * static_cast<double>((k * 3) % 7) / 6.0;
  return {{300.0 + 97.0 * static_cast<double>(k), 1100.0 + 173.0 * static_cast<double>((5 * k) % 23),
           2300.0 + 71.0 * static_cast<double>((11 * k) % 23)},
          {0.25 * level, 0.15 * level, 0.08 * level}};
}

std::string seconds(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << v;
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::string fixture_g2p_text() { return kG2p; }
std::string fixture_numbers_text() { return kNumbers; }

std::vector<Verse> Fixture::aligner_verses() const {
  std::vector<Verse> out;
  for (const auto& v : verses) out.push_back({v.id, v.text});
  return out;
}

Fixture make_fixture(const FixtureOptions& o) {
  if (o.min_phone_frames == 0 || o.max_phone_frames < o.min_phone_frames || o.max_pause_frames < o.min_pause_frames) {
    throw Error(ErrorKind::Invalid, "fixture: inconsistent duration ranges");
  }
  Fixture fx;
  fx.g2p = G2pTable::parse(kG2p, "fixture-g2p");
  fx.numbers = NumberDictionary::parse(kNumbers, "fixture-numbers");
  fx.hop_samples = static_cast<std::size_t>(std::llround(o.sample_rate * 0.01));
  fx.audio.sample_rate = o.sample_rate;

  std::map<std::string, Tone> tones;
  for (std::size_t k = 0; k < fx.g2p.inventory().size(); ++k) tones[fx.g2p.inventory()[k]] = tone_for(k);

  Rng rng(o.seed);
  const double rate = o.sample_rate;
  const std::size_t hop = fx.hop_samples;
  std::vector<float>& out = fx.audio.samples;
  std::vector<bool> speech;
  auto pause = [&](std::size_t frames) {
    out.insert(out.end(), frames * hop, 0.0f);
    speech.insert(speech.end(), frames * hop, false);
  };

  pause(o.edge_pause_frames);
  for (std::size_t v = 0;; ++v) {
    if (o.verse_count ? v >= o.verse_count : out.size() / rate >= o.target_seconds) break;
    if (v > 0) pause(rng.between(o.min_pause_frames, o.max_pause_frames));
    FixtureVerse verse;
    std::ostringstream id;
    id << 'v' << std::setw(3) << std::setfill('0') << v + 1;
    verse.id = id.str();
    verse.raw_text = make_sentence(rng, o, true);
    verse.text = clean_text(normalize_numbers(verse.raw_text, fx.numbers));
    for (const auto& phone : strip_boundaries(g2p(verse.text, fx.g2p))) {
      const std::size_t frames = rng.between(o.min_phone_frames, o.max_phone_frames);
      const Tone& tone = tones.at(phone);
      double phase[3];
      for (double& p : phase) p = 2.0 * std::numbers::pi * rng.uniform();
      const std::size_t begin = out.size();
      for (std::size_t i = 0; i < frames * hop; ++i) {
        double x = 0.0;
        for (int h = 0; h < 3; ++h) x += tone.amp[h] * std::sin(2.0 * std::numbers::pi * tone.freq[h] * static_cast<double>(i) / rate + phase[h]);
        out.push_back(static_cast<float>(x));
      }
      speech.insert(speech.end(), frames * hop, true);
      verse.phones.push_back({phone, static_cast<double>(begin) / rate, static_cast<double>(out.size()) / rate});
    }
    verse.start = verse.phones.front().start;
    verse.end = verse.phones.back().end;
    fx.verses.push_back(std::move(verse));
  }
  pause(o.edge_pause_frames);

  double noise_sigma = o.noise_floor;
  if (o.snr_db) {
    double power = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (speech[i]) {
        power += static_cast<double>(out[i]) * out[i];
        ++n;
      }
    }
    power /= static_cast<double>(std::max<std::size_t>(n, 1));
    noise_sigma = std::max(noise_sigma, std::sqrt(power / std::pow(10.0, *o.snr_db / 10.0)));
  }
  for (float& x : out) x = static_cast<float>(x + noise_sigma * rng.gaussian());

  for (std::size_t i = 0; i < o.prompt_count; ++i) {
    std::ostringstream id;
    id << 'p' << std::setw(4) << std::setfill('0') << i + 1;
    fx.prompts.emplace_back(id.str(), clean_text(make_sentence(rng, o, false)));
  }
  return fx;
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_wav(dir / "chapter.wav", fx.audio);
  write_text(dir / "g2p.tsv", fixture_g2p_text());
  write_text(dir / "numbers.tsv", fixture_numbers_text());

  std::ostringstream verses, truth, phones, prompts;
  for (const auto& v : fx.verses) {
    verses << v.id << '\t' << v.raw_text << '\n';
    truth << v.id << '\t' << seconds(v.start) << '\t' << seconds(v.end) << '\t' << v.text << '\n';
    for (const auto& p : v.phones) phones << v.id << '\t' << p.phone << '\t' << seconds(p.start) << '\t' << seconds(p.end) << '\n';
  }
  for (const auto& [id, text] : fx.prompts) prompts << id << '\t' << text << '\n';
  write_text(dir / "verses.tsv", verses.str());
  write_text(dir / "truth.tsv", truth.str());
  write_text(dir / "truth_phones.tsv", phones.str());
  write_text(dir / "prompts.tsv", prompts.str());
  write_text(dir / "voicecorpus.conf",
             "# per-language resources for the synthetic chapter\n"
             "language = fixture\n"
             "numbers = numbers.tsv\n"
             "g2p = g2p.tsv\n"
             "license = CC0-1.0\n"
             "source = synthetic/fixture\n"
             "speaker = fixture0\n");
}

}  // namespace vc
