#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "voicecorpus/dtw.hpp"
#include "voicecorpus/evalkit.hpp"
#include "voicecorpus/fixture.hpp"
#include "voicecorpus/synth.hpp"

using namespace vc;

namespace {

// Utterance of steady tones, one per phone, `frames` 10 ms frames each.
AudioClip tones(const std::vector<std::string>& phones, const std::vector<std::size_t>& frames,
                std::vector<TimedPhone>& timing) {
  AudioClip c;
  timing.clear();
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const double f = 200.0 + 150.0 * (phones[i][0] - 'a');
    const std::size_t begin = c.samples.size();
    for (std::size_t n = 0; n < frames[i] * 160; ++n) {
      c.samples.push_back(static_cast<float>(0.3 * std::sin(2.0 * M_PI * f * static_cast<double>(n) / 16000.0)));
    }
    timing.push_back({phones[i], begin / 16000.0, c.samples.size() / 16000.0});
  }
  return c;
}

struct Corpus {
  std::vector<AudioClip> clips;
  std::vector<std::vector<TimedPhone>> timings;
  std::vector<IndexInput> inputs;
  Voice voice;
};

Corpus random_corpus(std::mt19937_64& rng, std::size_t utterances) {
  Corpus c;
  c.clips.reserve(utterances);
  c.timings.resize(utterances);
  for (std::size_t u = 0; u < utterances; ++u) {
    std::vector<std::string> phones;
    std::vector<std::size_t> frames;
    for (std::size_t i = 0, n = 3 + rng() % 3; i < n; ++i) {
      phones.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
      frames.push_back(4 + rng() % 6);
    }
    c.clips.push_back(tones(phones, frames, c.timings[u]));
  }
  for (std::size_t u = 0; u < utterances; ++u) {
    c.inputs.push_back({"u" + std::to_string(u), &c.clips[u], c.timings[u]});
    c.voice.audio["u" + std::to_string(u)] = c.clips[u];
  }
  c.voice.index = build_unit_index(c.inputs);
  return c;
}

// Exhaustive search over every candidate combination.
double brute_plan(const SynthPlan& shape, const UnitIndex& index, const SynthOptions& o) {
  std::vector<std::pair<const std::vector<Unit>*, double>> slots;
  auto mean = [&](const std::string& p) { return index.duration_means.at(p); };
  std::size_t pos = 0;
  for (const auto& position : shape.positions) {
    for (const auto& u : position.units) {
      double expected = 0.0;
      if (u.kind == UnitKind::Diphone) {
        expected = (mean(shape.phones[pos - 1]) + mean(shape.phones[pos])) / 2.0;
      } else {
        expected = mean(u.label) / 2.0;
      }
      slots.emplace_back(index.find(u.kind, u.label), expected);
    }
    if (position.kind == UnitKind::Diphone || pos == 0) ++pos;
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<const Unit*> chosen;
  std::function<void(std::size_t, double)> rec = [&](std::size_t s, double acc) {
    if (s == slots.size()) {
      best = std::min(best, acc);
      return;
    }
    for (const Unit& u : *slots[s].first) {
      double join = 0.0;
      if (s > 0) {
        const Unit& p = *chosen.back();
        join = p.utterance_id == u.utterance_id && p.end_sample == u.start_sample
                   ? 0.0
                   : o.join_weight * euclidean(p.right_mfcc, u.left_mfcc);
      }
      const double target = o.target_weight * std::abs(static_cast<double>(u.sample_count()) /
                                                           static_cast<double>(index.hop_samples) -
                                                       slots[s].second);
      chosen.push_back(&u);
      rec(s + 1, (acc + join) + target);
      chosen.pop_back();
    }
  };
  rec(0, 0.0);
  return best;
}

}  // namespace

TEST_CASE("unit index: one utterance") {
  std::vector<TimedPhone> t;
  const AudioClip c = tones({"a", "b", "c"}, {6, 6, 6}, t);
  const UnitIndex idx = build_unit_index({{"u", &c, t}});
  CHECK(idx.diphones.size() == 2);
  CHECK(idx.diphones.at("a-b").size() == 1);
  CHECK(idx.diphones.at("b-c").size() == 1);
  CHECK(idx.diphone_unit_count() == 2);
  CHECK(idx.first_halves.size() == 3);
  CHECK(idx.duration_means.at("b") == doctest::Approx(6.0));
  const Unit& ab = idx.diphones.at("a-b")[0];
  CHECK(ab.start_sample == 480);
  CHECK(ab.end_sample == 1440);
  CHECK(build_unit_index(std::vector<IndexInput>{}).diphones.empty());
}

TEST_CASE("unit index: counts equal phones minus one per utterance") {
  std::mt19937_64 rng(5);
  const Corpus c = random_corpus(rng, 12);
  std::size_t expect = 0;
  for (const auto& t : c.timings) expect += t.size() - 1;
  CHECK(c.voice.index.diphone_unit_count() == expect);
}

TEST_CASE("unit index: save and load") {
  testing::TempDir dir("idx");
  std::mt19937_64 rng(6);
  Corpus c = random_corpus(rng, 4);
  c.voice.index.license = "CC0-1.0";
  save_unit_index(dir / "v.json", c.voice.index);
  const UnitIndex back = load_unit_index(dir / "v.json");
  CHECK(back.license == "CC0-1.0");
  CHECK(back.diphone_unit_count() == c.voice.index.diphone_unit_count());
  CHECK(back.diphones.begin()->second[0].left_mfcc == c.voice.index.diphones.begin()->second[0].left_mfcc);
  {
    std::ofstream out(dir / "bad.json");
    out << "{\"format\": \"other\"}";
  }
  CHECK_THROWS_AS(load_unit_index(dir / "bad.json"), Error);
}

TEST_CASE("plan: equals exhaustive search") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Corpus c = random_corpus(rng, 4);
    SynthOptions o;
    o.target_weight = 0.1 * static_cast<double>(rng() % 5);
    for (int q = 0; q < 4; ++q) {
      std::vector<std::string> phones;
      for (std::size_t i = 0, n = 2 + rng() % 2; i < n; ++i) phones.push_back(std::string(1, 'a' + rng() % 3));
      SynthPlan plan;
      try {
        plan = plan_units(phones, c.voice.index, o);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Infeasible);
        continue;
      }
      CHECK(plan.total_cost == brute_plan(plan, c.voice.index, o));
    }
  }
}

TEST_CASE("plan: single candidates force the plan") {
  std::vector<TimedPhone> t;
  const AudioClip c = tones({"a", "b", "c"}, {5, 7, 9}, t);
  Voice v;
  v.index = build_unit_index({{"u", &c, t}});
  v.audio["u"] = c;
  for (double w : {0.0, 1.0, 100.0}) {
    SynthOptions o;
    o.join_weight = w;
    o.target_weight = w;
    const SynthPlan plan = plan_units({"a", "b", "c"}, v.index, o);
    REQUIRE(plan.positions.size() == 4);
    for (const auto& p : plan.positions) CHECK(p.units[0].candidate == 0);
  }
  CHECK_THROWS_AS(plan_units({}, v.index), Error);
  CHECK_THROWS_AS(plan_units({"a", "z"}, v.index), Error);
}

TEST_CASE("plan: missing diphone backs off to halves") {
  std::vector<TimedPhone> t1, t2;
  const AudioClip c1 = tones({"a", "b"}, {6, 6}, t1);
  const AudioClip c2 = tones({"c", "a"}, {6, 6}, t2);
  const UnitIndex idx = build_unit_index({{"u1", &c1, t1}, {"u2", &c2, t2}});
  const SynthPlan plan = plan_units({"a", "b", "c"}, idx);
  REQUIRE(plan.positions.size() == 4);
  CHECK_FALSE(plan.positions[1].backoff);
  CHECK(plan.positions[2].backoff);
  CHECK(plan.positions[2].units.size() == 2);
  CHECK(plan.positions[2].units[0].kind == UnitKind::SecondHalf);
  CHECK(plan.positions[2].units[1].kind == UnitKind::FirstHalf);
}

TEST_CASE("render: contiguous units reconstruct the source") {
  std::vector<TimedPhone> t;
  const AudioClip c = tones({"a", "b", "c", "a"}, {6, 8, 7, 9}, t);
  Voice v;
  v.index = build_unit_index({{"u", &c, t}});
  v.audio["u"] = c;
  const SynthOutput out = synthesize_phones({"a", "b", "c", "a"}, v);
  REQUIRE(out.audio.samples.size() == c.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) worst = std::max(worst, static_cast<double>(std::abs(out.audio.samples[i] - c.samples[i])));
  CHECK(worst < 1e-6);
  for (const auto& p : out.plan.positions)
    for (const auto& u : p.units) CHECK(u.join_cost == 0.0);
}

TEST_CASE("copy-synthesis of a fixture sentence") {
  FixtureOptions o;
  o.seed = 2;
  o.verse_count = 12;
  const Fixture fx = make_fixture(o);
  Voice v;
  std::vector<AudioClip> clips;
  clips.reserve(fx.verses.size());
  std::vector<IndexInput> inputs;
  for (const auto& verse : fx.verses) {
    clips.push_back(slice_seconds(fx.audio, verse.start, verse.end));
    std::vector<TimedPhone> rel;
    for (const auto& p : verse.phones) rel.push_back({p.phone, p.start - verse.start, p.end - verse.start});
    inputs.push_back({verse.id, &clips.back(), rel});
    v.audio[verse.id] = clips.back();
  }
  v.index = build_unit_index(inputs);
  const auto& target = fx.verses[3];
  const SynthOutput out = synthesize(target.text, fx.g2p, v);
  const McdResult r = mcd(mfcc(out.audio), mfcc(clips[3]));
  CHECK(r.mean_mcd <= 1.0);
}

TEST_CASE("batch synthesis isolates failures") {
  testing::TempDir dir("batch");
  std::vector<TimedPhone> t;
  const AudioClip c = tones({"a", "b", "a"}, {6, 6, 6}, t);
  Voice v;
  v.index = build_unit_index({{"u", &c, t}});
  v.audio["u"] = c;
  const G2pTable table("xx", {});
  const BatchResult r = batch_synthesize({{"p1", "aba"}, {"p2", "ab"}, {"p3", "abz"}}, table, v, dir.path());
  CHECK(r.manifest.utterances.size() == 2);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].first == "p3");
  CHECK(std::filesystem::exists(dir / "p1.wav"));
  CHECK_FALSE(std::filesystem::exists(dir / "p3.wav"));
}
