#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "voicecorpus/error.hpp"
#include "voicecorpus/features.hpp"

namespace vc {

struct AlignmentPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> local_costs;
  double total_cost = 0.0;
};

// Euclidean distance between two equal-length frames.
double euclidean(std::span<const double> a, std::span<const double> b) noexcept;

// Globally minimal monotone path under Euclidean local cost with steps
// (0,1), (1,0), (1,1). Ties prefer the diagonal predecessor, then (1,0), then
// (0,1). Throws Error{Invalid} for empty tracks or mismatched dimensions.
AlignmentPath dtw(const FeatureTrack& a, const FeatureTrack& b);

// Same recursion over an arbitrary local cost `cost(i, j)`.
template <class LocalCost>
AlignmentPath dtw_with_cost(std::size_t n, std::size_t m, LocalCost&& cost) {
  if (n == 0 || m == 0) throw Error(ErrorKind::Invalid, "dtw: empty input");

  enum : std::uint8_t { kDiag, kUp, kLeft };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> local(n * m);
  std::vector<double> acc(n * m, kInf);
  std::vector<std::uint8_t> from(n * m, kDiag);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t at = i * m + j;
      local[at] = cost(i, j);
      if (i == 0 && j == 0) {
        acc[at] = local[at];
        continue;
      }
      double best = kInf;
      std::uint8_t step = kDiag;
      if (i > 0 && j > 0) best = acc[at - m - 1];
      if (i > 0 && acc[at - m] < best) {
        best = acc[at - m];
        step = kUp;
      }
      if (j > 0 && acc[at - 1] < best) {
        best = acc[at - 1];
        step = kLeft;
      }
      acc[at] = best + local[at];
      from[at] = step;
    }
  }

  AlignmentPath path;
  std::size_t i = n - 1;
  std::size_t j = m - 1;
  while (true) {
    path.pairs.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    switch (from[i * m + j]) {
      case kDiag: --i; --j; break;
      case kUp: --i; break;
      case kLeft: --j; break;
    }
  }
  std::reverse(path.pairs.begin(), path.pairs.end());

  // Forward accumulation reproduces the recursion's additions exactly.
  path.local_costs.reserve(path.pairs.size());
  for (const auto& [pi, pj] : path.pairs) {
    const double c = local[pi * m + pj];
    path.local_costs.push_back(c);
    path.total_cost += c;
  }
  return path;
}

}  // namespace vc
