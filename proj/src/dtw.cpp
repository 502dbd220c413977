#include "voicecorpus/dtw.hpp"

#include <cmath>
#include <string>

namespace vc {

double euclidean(std::span<const double> a, std::span<const double> b) noexcept {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

AlignmentPath dtw(const FeatureTrack& a, const FeatureTrack& b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::Invalid, "dtw: empty feature track");
  if (a.dim != b.dim) {
    throw Error(ErrorKind::Invalid, "dtw: dimension mismatch (" + std::to_string(a.dim) + " vs " +
                                        std::to_string(b.dim) + ")");
  }
  return dtw_with_cost(a.frame_count(), b.frame_count(),
                       [&](std::size_t i, std::size_t j) { return euclidean(a.frame(i), b.frame(j)); });
}

}  // namespace vc
