#pragma once

#include <map>
#include <string>
#include <vector>

#include "hg/dcdmmd/distances.hpp"
#include "hg/dcdmmd/mmd.hpp"
#include "hg/error.hpp"
#include "hg/objective/losses.hpp"
#include "hg/tensor.hpp"

namespace hg::dcd {

// Records the bandwidths resolved for every MMD term of a step. When frozen, the
// recorded values are reused instead of recomputing the median heuristic; finite
// difference checks need this because the bandwidth is treated as a constant.
struct BandwidthMemo {
  bool frozen = false;
  std::map<std::string, std::vector<double>> table;

  std::vector<double> get(const std::string& key, const KernelConfig& kernel, std::span<const double> a,
                          std::span<const double> b) {
    if (frozen) {
      const auto it = table.find(key);
      require(it != table.end(), "BandwidthMemo: no frozen bandwidths for " + key);
      return it->second;
    }
    auto bw = resolve_bandwidths(kernel, a, b);
    table[key] = bw;
    return bw;
  }
};

struct DcdOptions {
  bool use_global = true;  // include the global feature term
};

template <typename S>
struct DcdResult {
  double l_d = 0.0;
  double l_d_wc = 0.0;
  double l_d_bc = 0.0;
  double l_global = 0.0;
  Tensor<S> grad_attended;  // d l_d / d student attended parts
  Tensor<S> grad_raw;       // d l_d / d student raw parts (global term)
  std::vector<DistanceDistributionPair> teacher;
  std::vector<DistanceDistributionPair> student;
};

namespace detail {

template <typename S>
std::vector<double> part_coordinates(const Tensor<S>& parts, int part) {
  const int B = parts.dim(0), C = parts.dim(2);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(B) * C);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) out.push_back(parts.at(b, part, c));
  return out;
}

}  // namespace detail

// Distribution-matching loss between teacher (holistic) and student (occluded) DCDs.
// Teacher features are read as constants: no gradient is produced for them.
//   l_d = lambda1 * mean_i MMD(wc_N(i), wc_O(i)) + lambda2 * mean_i MMD(bc_N(i), bc_O(i))
//       + lambda3 * mean_i MMD(coords f_N^i, coords f_O^i)
template <typename S>
DcdResult<S> dcd_loss(const Tensor<S>& teacher_parts, const std::vector<int>& teacher_labels,
                      const Tensor<S>& student_attended, const std::vector<int>& student_labels,
                      const Tensor<S>& student_raw, const KernelConfig& kernel, const objective::LossWeights& weights,
                      const DcdOptions& options = {}, BandwidthMemo* memo = nullptr, bool need_grad = true) {
  require(teacher_parts.rank() == 3 && student_attended.rank() == 3,
          "dcd_loss: expected (B,p,C) part features");
  require(teacher_parts.dim(1) == student_attended.dim(1) && teacher_parts.dim(2) == student_attended.dim(2),
          "dcd_loss: teacher and student feature sets must share p and C");
  const bool use_global = options.use_global && weights.lambda3 != 0.0;
  if (use_global)
    require(student_raw.same_shape(student_attended), "dcd_loss: raw student parts must match attended shape");
  BandwidthMemo local;
  BandwidthMemo& bw = memo ? *memo : local;

  const int p = teacher_parts.dim(1);
  DcdResult<S> r;
  r.teacher = pairwise_part_distances(teacher_parts, teacher_labels, synth::Domain::holistic);
  r.student = pairwise_part_distances(student_attended, student_labels, synth::Domain::occluded);
  if (need_grad) {
    r.grad_attended = Tensor<S>(student_attended.shape());
    r.grad_raw = Tensor<S>(student_attended.shape());
  }
  const double inv_p = 1.0 / p;
  for (int i = 0; i < p; ++i) {
    const auto& t = r.teacher[static_cast<std::size_t>(i)];
    const auto& s = r.student[static_cast<std::size_t>(i)];
    if (!t.within.empty() && !s.within.empty()) {
      const auto sig = bw.get("wc/" + std::to_string(i), kernel, t.within, s.within);
      const auto m = mmd_with_grad(t.within, s.within, sig, need_grad && weights.lambda1 != 0.0);
      r.l_d_wc += m.value * inv_p;
      if (!m.grad_b.empty()) {
        std::vector<double> g(m.grad_b.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = weights.lambda1 * inv_p * m.grad_b[k];
        distance_backward(student_attended, i, s.within_pairs, s.within, g, r.grad_attended);
      }
    }
    if (!t.between.empty() && !s.between.empty()) {
      const auto sig = bw.get("bc/" + std::to_string(i), kernel, t.between, s.between);
      const auto m = mmd_with_grad(t.between, s.between, sig, need_grad && weights.lambda2 != 0.0);
      r.l_d_bc += m.value * inv_p;
      if (!m.grad_b.empty()) {
        std::vector<double> g(m.grad_b.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = weights.lambda2 * inv_p * m.grad_b[k];
        distance_backward(student_attended, i, s.between_pairs, s.between, g, r.grad_attended);
      }
    }
    if (use_global) {
      const auto tc = detail::part_coordinates(teacher_parts, i);
      const auto sc = detail::part_coordinates(student_raw, i);
      const auto sig = bw.get("global/" + std::to_string(i), kernel, tc, sc);
      const auto m = mmd_with_grad(tc, sc, sig, need_grad);
      r.l_global += m.value * inv_p;
      if (!m.grad_b.empty()) {
        const int B = student_raw.dim(0), C = student_raw.dim(2);
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            r.grad_raw.at(b, i, c) +=
                static_cast<S>(weights.lambda3 * inv_p * m.grad_b[static_cast<std::size_t>(b) * C + c]);
      }
    }
  }
  r.l_d = weights.lambda1 * r.l_d_wc + weights.lambda2 * r.l_d_bc + weights.lambda3 * r.l_global;
  return r;
}

}  // namespace hg::dcd
