#pragma once

#include <cmath>
#include <vector>

#include "hg/error.hpp"
#include "hg/synthdata/image.hpp"
#include "hg/tensor.hpp"

namespace hg::dcd {

struct PairIndex {
  int a = 0;
  int b = 0;
};

// Within-class and between-class distance samples of one part in one domain.
struct DistanceDistributionPair {
  std::vector<double> within;
  std::vector<double> between;
  std::vector<PairIndex> within_pairs;
  std::vector<PairIndex> between_pairs;
  int part = 0;
  synth::Domain domain = synth::Domain::holistic;

  // Empty within-set: no same-label pair in the batch, the wc term is skipped.
  bool within_missing() const { return within.empty(); }
};

// Euclidean distances of every unordered pair (a<b) of samples, per part.
// parts: (B, p, C).
template <typename S>
std::vector<DistanceDistributionPair> pairwise_part_distances(const Tensor<S>& parts, const std::vector<int>& labels,
                                                              synth::Domain domain = synth::Domain::holistic) {
  require(parts.rank() == 3, "pairwise_part_distances: expected (B,p,C) parts, got " + parts.shape_str());
  const int B = parts.dim(0), p = parts.dim(1), C = parts.dim(2);
  require(B >= 2, "pairwise_part_distances: need at least two samples");
  require(static_cast<int>(labels.size()) == B, "pairwise_part_distances: label count does not match batch");
  std::vector<DistanceDistributionPair> out(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    auto& dd = out[static_cast<std::size_t>(i)];
    dd.part = i;
    dd.domain = domain;
    for (int a = 0; a < B; ++a)
      for (int b = a + 1; b < B; ++b) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
          const double diff = static_cast<double>(parts.at(a, i, c)) - parts.at(b, i, c);
          s += diff * diff;
        }
        const double dist = std::sqrt(s);
        if (labels[a] == labels[b]) {
          dd.within.push_back(dist);
          dd.within_pairs.push_back({a, b});
        } else {
          dd.between.push_back(dist);
          dd.between_pairs.push_back({a, b});
        }
      }
  }
  return out;
}

// Accumulates d(loss)/d(parts) from per-distance gradients of one part.
// Coinciding pairs (distance 0) contribute nothing.
template <typename S>
void distance_backward(const Tensor<S>& parts, int part, const std::vector<PairIndex>& pairs,
                       const std::vector<double>& dist, const std::vector<double>& grad, Tensor<S>& dparts) {
  const int C = parts.dim(2);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (dist[k] == 0.0 || grad[k] == 0.0) continue;
    const double scale = grad[k] / dist[k];
    const int a = pairs[k].a, b = pairs[k].b;
    for (int c = 0; c < C; ++c) {
      const double g = scale * (static_cast<double>(parts.at(a, part, c)) - parts.at(b, part, c));
      dparts.at(a, part, c) += static_cast<S>(g);
      dparts.at(b, part, c) -= static_cast<S>(g);
    }
  }
}

}  // namespace hg::dcd
