#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "voicecorpus/dtw.hpp"
#include "voicecorpus/features.hpp"

using namespace vc;

namespace {

// Every monotone path from (0,0) to (n-1,m-1), each summed front to back.
void brute_dtw(const std::vector<std::vector<double>>& local, std::size_t i, std::size_t j, double acc, double& best) {
  const std::size_t n = local.size(), m = local[0].size();
  acc += local[i][j];
  if (i == n - 1 && j == m - 1) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < n && j + 1 < m) brute_dtw(local, i + 1, j + 1, acc, best);
  if (i + 1 < n) brute_dtw(local, i + 1, j, acc, best);
  if (j + 1 < m) brute_dtw(local, i, j + 1, acc, best);
}

FeatureTrack random_track(std::mt19937_64& rng, std::size_t frames, std::size_t dim) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::vector<double>> rows(frames, std::vector<double>(dim));
  for (auto& r : rows)
    for (auto& x : r) x = u(rng);
  return FeatureTrack::from_rows(rows);
}

}  // namespace

TEST_CASE("mfcc framing") {
  const MfccConfig cfg;
  CHECK(frame_length_samples(cfg, 16000) == 400);
  CHECK(frame_shift_samples(cfg, 16000) == 160);
  CHECK(mfcc_frame_count(16000, cfg, 16000) == 98);
  CHECK(mfcc_frame_count(399, cfg, 16000) == 0);
  const FeatureTrack t = mfcc(testing::sine(440.0, 1.0));
  CHECK(t.frame_count() == 98);
  CHECK(t.dim == 25);
  CHECK(t.includes_c0);
}

TEST_CASE("mfcc is deterministic") {
  const AudioClip c = testing::noise(0.5, 0.1, 7);
  CHECK(mfcc(c).values == mfcc(c).values);
}

TEST_CASE("mfcc separates noise from a low tone") {
  const FeatureTrack a = mfcc(testing::noise(1.0, 0.1, 3));
  const FeatureTrack b = mfcc(testing::sine(200.0, 1.0));
  double ca = 0, cb = 0;
  for (std::size_t f = 0; f < a.frame_count(); ++f) ca += a.frame(f)[1];
  for (std::size_t f = 0; f < b.frame_count(); ++f) cb += b.frame(f)[1];
  ca /= static_cast<double>(a.frame_count());
  cb /= static_cast<double>(b.frame_count());
  CHECK(std::abs(ca - cb) > 1.0);
}

TEST_CASE("mfcc config validation") {
  MfccConfig cfg;
  cfg.num_coefficients = 40;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(mfcc(testing::sine(100, 0.01)), Error);
}

TEST_CASE("dtw: identical tracks") {
  std::mt19937_64 rng(5);
  const FeatureTrack a = random_track(rng, 7, 3);
  const AlignmentPath p = dtw(a, a);
  CHECK(p.total_cost == 0.0);
  REQUIRE(p.pairs.size() == 7);
  for (std::size_t k = 0; k < 7; ++k) CHECK(p.pairs[k] == std::pair<std::size_t, std::size_t>{k, k});
}

TEST_CASE("dtw: repeated frame costs nothing") {
  const FeatureTrack a = FeatureTrack::from_rows({{0.0}, {1.0}});
  const FeatureTrack b = FeatureTrack::from_rows({{0.0}, {0.0}, {1.0}});
  CHECK(dtw(a, b).total_cost == 0.0);
}

TEST_CASE("dtw: matches exhaustive enumeration") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + rng() % 6, m = 1 + rng() % 6;
    const FeatureTrack a = random_track(rng, n, 2), b = random_track(rng, m, 2);
    std::vector<std::vector<double>> local(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) local[i][j] = euclidean(a.frame(i), b.frame(j));
    const AlignmentPath p = dtw(a, b);
    double best = std::numeric_limits<double>::infinity();
    brute_dtw(local, 0, 0, 0.0, best);
    CHECK(p.total_cost == best);
    CHECK(p.pairs.front() == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(p.pairs.back() == std::pair<std::size_t, std::size_t>{n - 1, m - 1});
    for (std::size_t k = 1; k < p.pairs.size(); ++k) {
      const auto di = p.pairs[k].first - p.pairs[k - 1].first;
      const auto dj = p.pairs[k].second - p.pairs[k - 1].second;
      CHECK(di <= 1);
      CHECK(dj <= 1);
      CHECK(di + dj >= 1);
    }
  }
}

TEST_CASE("dtw: ties prefer the diagonal") {
  const AlignmentPath p = dtw_with_cost(2, 2, [](std::size_t, std::size_t) { return 0.0; });
  CHECK(p.pairs.size() == 2);
}

TEST_CASE("dtw: errors") {
  const FeatureTrack a = FeatureTrack::from_rows({{0.0, 1.0}});
  const FeatureTrack b = FeatureTrack::from_rows({{0.0}});
  CHECK_THROWS_AS(dtw(a, b), Error);
  CHECK_THROWS_AS(dtw(a, FeatureTrack{}), Error);
}
