#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <doctest.h>

#include "voicecorpus/aligner.hpp"
#include "voicecorpus/fixture.hpp"

using namespace vc;

namespace {

FeatureTrack random_track(std::mt19937_64& rng, std::size_t frames, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureTrack t;
  t.dim = dim;
  t.includes_c0 = false;
  for (std::size_t i = 0; i < frames * dim; ++i) t.values.push_back(n(rng));
  return t;
}

PhoneModelSet random_models(std::mt19937_64& rng, const std::vector<std::string>& phones, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> v(0.3, 2.0);
  PhoneModelSet m;
  m.global = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  for (const auto& p : phones) {
    DiagGaussian g;
    for (std::size_t d = 0; d < dim; ++d) {
      g.mean.push_back(n(rng));
      g.variance.push_back(v(rng));
    }
    m.phones[p] = g;
  }
  return m;
}

// Minimum cost over every placement of segment boundaries, each segment at
// least `min_dur` frames; optional slots may also be dropped.
double brute_segment(const FeatureTrack& f, const std::vector<PhoneSlot>& slots, const PhoneModelSet& m,
                     std::size_t min_dur) {
  const std::size_t frames = f.frame_count();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, std::size_t>> chosen;  // phone, end frame
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t start) {
    if (k == slots.size()) {
      if (start != frames) return;
      double total = 0.0;
      std::size_t s = 0;
      for (const auto& [phone, end] : chosen) {
        for (std::size_t t = s; t < end; ++t) total += m.frame_cost(phone, f.frame(t));
        s = end;
      }
      best = std::min(best, total);
      return;
    }
    if (slots[k].optional) rec(k + 1, start);
    for (std::size_t end = start + min_dur; end <= frames; ++end) {
      chosen.emplace_back(slots[k].phone, end);
      rec(k + 1, end);
      chosen.pop_back();
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("flat_segment") {
  const std::vector<std::string> two{"a", "b"}, three{"a", "b", "c"}, one{"a"};
  auto lengths = [](const Segmentation& s) {
    std::vector<std::size_t> out;
    for (const auto& seg : s.segments) out.push_back(seg.length());
    return out;
  };
  CHECK(lengths(flat_segment(two, 10, 1)) == std::vector<std::size_t>{5, 5});
  CHECK(lengths(flat_segment(three, 10, 1)) == std::vector<std::size_t>{4, 3, 3});
  const Segmentation s = flat_segment(one, 17, 3);
  CHECK(s.segments.size() == 1);
  CHECK(s.segments[0].start_frame == 0);
  CHECK(s.segments[0].end_frame == 17);
  CHECK_THROWS_AS(flat_segment(three, 8, 3), Error);
}

TEST_CASE("estimate_models") {
  SUBCASE("constant frames give floored variance") {
    const FeatureTrack t = FeatureTrack::from_rows({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
    Segmentation seg;
    seg.segments.push_back({"a", 0, 3, 0.0});
    const PhoneModelSet m = estimate_models(t, seg, 0.01);
    CHECK(m.model("a").mean == std::vector<double>{1.0, 2.0});
    CHECK(m.model("a").variance == std::vector<double>{0.01, 0.01});
  }
  SUBCASE("two occurrences pool") {
    const FeatureTrack t = FeatureTrack::from_rows({{1.0}, {9.0}, {3.0}});
    Segmentation seg;
    seg.segments = {{"a", 0, 1, 0.0}, {"b", 1, 2, 0.0}, {"a", 2, 3, 0.0}};
    CHECK(estimate_models(t, seg).model("a").mean[0] == doctest::Approx(2.0));
  }
  SUBCASE("random segmentations match a direct accumulation") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
      const FeatureTrack t = random_track(rng, 40, 3);
      Segmentation seg;
      std::size_t start = 0;
      const std::vector<std::string> names{"a", "b", "c"};
      while (start < 40) {
        const std::size_t len = std::min<std::size_t>(1 + rng() % 6, 40 - start);
        seg.segments.push_back({names[rng() % 3], start, start + len, 0.0});
        start += len;
      }
      const PhoneModelSet m = estimate_models(t, seg, 1e-6);
      for (const auto& name : names) {
        std::vector<double> sum(3, 0.0);
        double n = 0;
        for (const auto& s : seg.segments) {
          if (s.phone != name) continue;
          for (std::size_t f = s.start_frame; f < s.end_frame; ++f) {
            for (std::size_t d = 0; d < 3; ++d) sum[d] += t.frame(f)[d];
            n += 1;
          }
        }
        if (n == 0) continue;
        for (std::size_t d = 0; d < 3; ++d) CHECK(m.model(name).mean[d] == doctest::Approx(sum[d] / n).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("viterbi: single phone takes the whole track") {
  std::mt19937_64 rng(1);
  const FeatureTrack t = random_track(rng, 9, 2);
  const std::vector<std::string> one{"a"};
  const Segmentation s = viterbi_segment(t, one, random_models(rng, one, 2), 3);
  REQUIRE(s.segments.size() == 1);
  CHECK(s.segments[0].end_frame == 9);
}

TEST_CASE("viterbi: boundary lands on the region change") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 7; ++i) rows.push_back({0.0, 0.0});
  for (int i = 0; i < 5; ++i) rows.push_back({4.0, -4.0});
  const FeatureTrack t = FeatureTrack::from_rows(rows);
  Segmentation init;
  init.segments = {{"A", 0, 7, 0.0}, {"B", 7, 12, 0.0}};
  const PhoneModelSet m = estimate_models(t, init);
  const std::vector<std::string> ab{"A", "B"};
  const Segmentation s = viterbi_segment(t, ab, m, 2);
  CHECK(s.segments[1].start_frame == 7);
  std::vector<PhoneSlot> slots{{"A", false}, {"B", false}};
  CHECK(s.total_cost == brute_segment(t, slots, m, 2));
}

TEST_CASE("viterbi: equals brute force") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t frames = 4 + rng() % 9;
    const std::size_t min_dur = 1 + rng() % 3;
    std::vector<PhoneSlot> slots;
    const std::size_t count = 1 + rng() % 4;
    for (std::size_t k = 0; k < count; ++k) slots.push_back({names[rng() % 3], trial % 2 == 1 && rng() % 3 == 0});
    std::size_t mandatory = 0;
    for (const auto& s : slots) mandatory += s.optional ? 0 : 1;
    if (mandatory == 0 || frames < mandatory * min_dur) continue;
    const FeatureTrack t = random_track(rng, frames, 2);
    const PhoneModelSet m = random_models(rng, names, 2);
    const Segmentation s = viterbi_segment(t, slots, m, min_dur);
    CHECK(s.total_cost == brute_segment(t, slots, m, min_dur));
    std::size_t at = 0;
    for (const auto& seg : s.segments) {
      CHECK(seg.start_frame == at);
      CHECK(seg.length() >= min_dur);
      at = seg.end_frame;
    }
    CHECK(at == frames);
  }
}

TEST_CASE("viterbi: too short") {
  std::mt19937_64 rng(2);
  const FeatureTrack t = random_track(rng, 5, 2);
  const std::vector<std::string> ab{"a", "b"};
  CHECK_THROWS_AS(viterbi_segment(t, ab, random_models(rng, ab, 2), 3), Error);
}

TEST_CASE("snap_to_silence") {
  std::vector<bool> mask(30, true);
  mask[10] = false;
  CHECK(snap_to_silence(10, mask) == 10);
  std::vector<bool> m2(30, true);
  m2[13] = false;
  m2[3] = false;
  CHECK(snap_to_silence(10, m2) == 13);
  CHECK(snap_to_silence(10, std::vector<bool>(30, true)) == 10);
  std::vector<bool> m3(30, true);
  m3[8] = m3[12] = false;
  CHECK(snap_to_silence(10, m3) == 8);
}

TEST_CASE("filter_by_score") {
  ChapterAlignment a;
  const double scores[] = {4.0, 1.0, 3.0, 2.0};
  for (int i = 0; i < 4; ++i) a.utterances.push_back({"v" + std::to_string(i), "", 0, 1, scores[i], {}});
  CHECK(filter_by_score(a, 1.0).utterances.size() == 4);
  const auto half = filter_by_score(a, 0.5);
  REQUIRE(half.utterances.size() == 2);
  CHECK(half.utterances[0].verse_id == "v1");
  CHECK(half.utterances[1].verse_id == "v3");
  ChapterAlignment equal;
  for (int i = 0; i < 5; ++i) equal.utterances.push_back({"v" + std::to_string(i), "", 0, 1, 1.0, {}});
  const auto kept = filter_by_score(equal, 0.5);
  REQUIRE(kept.utterances.size() == 3);
  CHECK(kept.utterances[2].verse_id == "v2");
  CHECK_THROWS_AS(filter_by_score(a, 0.0), Error);
}

TEST_CASE("align_chapter: short synthetic chapter") {
  FixtureOptions o;
  o.seed = 4;
  o.verse_count = 8;
  const Fixture fx = make_fixture(o);
  const ChapterAlignment al = align_chapter(fx.audio, fx.aligner_verses(), fx.g2p);
  REQUIRE(al.utterances.size() == fx.verses.size());
  for (std::size_t k = 1; k < al.iteration_costs.size(); ++k) {
    CHECK(al.iteration_costs[k] <= al.iteration_costs[k - 1] + 1e-9 * std::abs(al.iteration_costs[k - 1]));
  }
  for (std::size_t i = 0; i < fx.verses.size(); ++i) {
    const auto& u = al.utterances[i];
    CHECK(u.verse_id == fx.verses[i].id);
    CHECK(std::abs(u.phones.front().start - fx.verses[i].start) <= 0.02);
    CHECK(std::abs(u.phones.back().end - fx.verses[i].end) <= 0.02);
    CHECK(u.start_time <= u.phones.front().start);
    CHECK(u.end_time >= u.phones.back().end);
  }
}

TEST_CASE("align_chapter: single verse") {
  FixtureOptions o;
  o.seed = 6;
  o.verse_count = 1;
  const Fixture fx = make_fixture(o);
  const ChapterAlignment al = align_chapter(fx.audio, fx.aligner_verses(), fx.g2p);
  REQUIRE(al.utterances.size() == 1);
  CHECK(std::abs(al.utterances[0].phones.front().start - fx.verses[0].start) <= 0.02);
  CHECK(std::abs(al.utterances[0].phones.back().end - fx.verses[0].end) <= 0.02);
}
