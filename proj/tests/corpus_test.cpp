#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "helpers.hpp"
#include "voicecorpus/corpus.hpp"

using namespace vc;

namespace {

Manifest random_corpus(std::mt19937_64& rng, double minimum_minutes) {
  std::uniform_real_distribution<double> dur(1.0, 14.0);
  Manifest m;
  m.license = "CC0-1.0";
  double t = 0.0;
  for (int i = 0; t < minimum_minutes * 60.0; ++i) {
    const double d = dur(rng);
    m.utterances.push_back({"u" + std::to_string(i), "chapter.wav", t, t + d, "s", "x", std::nullopt});
    t += d + 0.5;
  }
  return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
  Manifest m;
  m.language = "luo";
  m.source = "found";
  m.license = "CC-BY-SA-4.0";
  m.utterances.push_back({"a1", "a1.wav", 0.0, 0.0, "spk", "ka ma", std::nullopt});
  m.utterances.push_back({"a2", "ch.wav", 1.5, 3.25, "spk", "nyithindo", 12.5});
  std::stringstream s;
  write_manifest(s, m);
  const Manifest back = parse_manifest(s, "mem");
  CHECK(back.language == "luo");
  CHECK(back.license == "CC-BY-SA-4.0");
  REQUIRE(back.utterances.size() == 2);
  CHECK(back.utterances[0].whole_file());
  CHECK(back.utterances[1].end == 3.25);
  CHECK(back.utterances[1].score == 12.5);
  CHECK_FALSE(back.utterances[0].score);
}

TEST_CASE("manifest format errors carry a line number") {
  std::stringstream s("#license: x\na\tb\tc\n");
  try {
    parse_manifest(s, "bad.tsv");
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()).find("bad.tsv:2") != std::string::npos);
  }
}

TEST_CASE("validate") {
  testing::TempDir dir("val");
  write_wav(dir / "a.wav", testing::sine(200, 0.5));
  Manifest m;
  m.license = "CC0-1.0";
  m.utterances.push_back({"a", "a.wav", 0, 0, "s", "ka", std::nullopt});
  CHECK(validate(m, dir.path()).empty());

  Manifest dup = m;
  dup.utterances.push_back(dup.utterances[0]);
  const auto v = validate(dup, dir.path());
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == "duplicate-id");
  CHECK(v[0].utterance_id == "a");

  Manifest digits = m;
  digits.utterances[0].text = "sura 3";
  CHECK(validate(digits, dir.path())[0].kind == "digits");

  Manifest missing = m;
  missing.utterances[0].audio_path = "nope.wav";
  missing.license.clear();
  std::set<std::string> kinds;
  for (const auto& f : validate(missing, dir.path())) kinds.insert(f.kind);
  CHECK(kinds == std::set<std::string>{"missing-audio", "no-license"});
}

TEST_CASE("stats") {
  Manifest empty;
  const CorpusStats e = stats(empty);
  CHECK(e.utterance_count == 0);
  CHECK(e.total_seconds == 0.0);
  CHECK_FALSE(e.mean_seconds);
  Manifest two;
  two.utterances.push_back({"a", "x.wav", 0, 30, "s", "t", std::nullopt});
  two.utterances.push_back({"b", "x.wav", 30, 60, "s", "t", std::nullopt});
  const CorpusStats s = stats(two);
  CHECK(s.utterance_count == 2);
  CHECK(s.total_hours() == doctest::Approx(0.0167).epsilon(0.01));
  CHECK(*s.mean_seconds == doctest::Approx(30.0));
}

TEST_CASE("cut_audio") {
  testing::TempDir dir("cut");
  const AudioClip audio = testing::sine(300.0, 3.0);
  ChapterAlignment al;
  al.utterances.push_back({"v1", "ka", 0.2, 1.1, 1.0, {{"k", 0.3, 0.6}, {"a", 0.6, 1.0}}});
  al.utterances.push_back({"v2", "ma", 1.5, 2.75, 1.0, {{"m", 1.5, 2.0}, {"a", 2.0, 2.75}}});
  CutOptions opt;
  opt.license = "CC0-1.0";
  opt.id_prefix = "ch1_";
  const CutResult r = cut_audio(al, audio, dir / "out", opt);
  REQUIRE(r.manifest.utterances.size() == 2);
  const AudioClip c1 = load_wav(dir / "out" / "ch1_v1.wav");
  const AudioClip c2 = load_wav(dir / "out" / "ch1_v2.wav");
  CHECK(std::abs(static_cast<double>(c1.samples.size()) - 0.9 * 16000) <= 1.0);
  CHECK(std::abs(static_cast<double>(c2.samples.size()) - 1.25 * 16000) <= 1.0);
  CHECK(active_rms_dbfs(c1) == doctest::Approx(kDefaultTargetDbfs).epsilon(0.01));
  const auto& p1 = r.phones.at("ch1_v1");
  CHECK(p1.front().phone == "sil");
  CHECK(p1.front().start == 0.0);
  CHECK(p1[1].start == doctest::Approx(0.1));
  CHECK(p1.back().phone == "sil");
  CHECK(r.phones.at("ch1_v2").front().phone == "m");
  CHECK(validate(r.manifest, dir / "out").empty());

  al.utterances.push_back({"v3", "x", 2.9, 3.5, 1.0, {}});
  CHECK_THROWS_AS(cut_audio(al, audio, dir / "out2", opt), Error);
}

TEST_CASE("phone alignments round trip") {
  testing::TempDir dir("ph");
  PhoneAlignments p{{"u1", {{"a", 0.0, 0.1}, {"b", 0.1, 0.25}}}, {"u2", {{"c", 0.0, 0.5}}}};
  write_phone_alignments(dir / "p.tsv", p, {"u2", "u1"});
  const PhoneAlignments back = read_phone_alignments(dir / "p.tsv");
  CHECK(back.size() == 2);
  CHECK(back.at("u1")[1].end == doctest::Approx(0.25));
}

TEST_CASE("splits are nested and close to target") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    const Manifest m = random_corpus(rng, 110.0);
    double longest = 0.0;
    for (const auto& u : m.utterances) longest = std::max(longest, u.duration());
    SplitSpec spec;
    if (t % 2) spec.seed = static_cast<std::uint64_t>(t);
    const auto splits = make_splits(m, spec);
    REQUIRE(splits.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      const double target = spec.minutes[k] * 60.0;
      CHECK(std::abs(splits[k].total_duration() - target) <= longest);
      CHECK(splits[k].total_duration() >= target);
      if (k == 0) continue;
      std::set<std::string> bigger;
      for (const auto& u : splits[k].utterances) bigger.insert(u.id);
      for (const auto& u : splits[k - 1].utterances) CHECK(bigger.contains(u.id));
    }
  }
}

TEST_CASE("split edge cases") {
  std::mt19937_64 rng(1);
  const Manifest m = random_corpus(rng, 5.0);
  SplitSpec whole;
  whole.minutes = {m.total_duration() / 60.0};
  CHECK(make_splits(m, whole)[0].utterances.size() == m.utterances.size());
  SplitSpec too_big;
  too_big.minutes = {60.0};
  CHECK_THROWS_AS(make_splits(m, too_big), Error);
  SplitSpec unordered;
  unordered.minutes = {3.0, 2.0};
  CHECK_THROWS_AS(make_splits(m, unordered), Error);
  CHECK(split_suffix(25) == "_25min");
  CHECK(split_suffix(2.5) == "_2.5min");
}

TEST_CASE("seeded_permutation") {
  const auto p = seeded_permutation(50, 3);
  CHECK(p == seeded_permutation(50, 3));
  CHECK(p != seeded_permutation(50, 4));
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
