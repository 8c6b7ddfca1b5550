#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/tensor.hpp"

namespace hg::objective {

// Trade-off weights of the training objective.
struct LossWeights {
  double lambda_recon = 0.01;  // reconstruction weight inside the joint loss
  double lambda1 = 0.5;        // within-class DCD matching
  double lambda2 = 0.5;        // between-class DCD matching
  double lambda3 = 1.0;        // global feature matching
  double alpha = 0.5;          // joint vs. distribution-matching balance
  double occ_cls_weight = 0.1;

  void validate() const {
    const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    require(ok(lambda_recon), "LossWeights: lambda_recon must be finite and >= 0");
    require(ok(lambda1) && ok(lambda2) && ok(lambda3), "LossWeights: lambda1..3 must be finite and >= 0");
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, "LossWeights: alpha must lie in [0,1]");
    require(ok(occ_cls_weight), "LossWeights: occ_cls_weight must be finite and >= 0");
  }
};

template <typename S>
struct LossWithGrad {
  double value = 0.0;
  Tensor<S> grad;  // d value / d input
};

// Sum over parts of the batch-mean softmax cross-entropy. logits: (B, p, K).
template <typename S>
LossWithGrad<S> parts_ce_loss(const Tensor<S>& logits, const std::vector<int>& labels) {
  require(logits.rank() == 3, "parts_ce_loss: expected (B,p,K) logits, got " + logits.shape_str());
  const int B = logits.dim(0), p = logits.dim(1), K = logits.dim(2);
  require(static_cast<int>(labels.size()) == B, "parts_ce_loss: label count does not match batch");
  for (int y : labels)
    require(y >= 0 && y < K, "parts_ce_loss: label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
  LossWithGrad<S> out{0.0, Tensor<S>(logits.shape())};
  std::vector<double> prob(static_cast<std::size_t>(K));
  for (int i = 0; i < p; ++i) {
    double part = 0.0;
    for (int b = 0; b < B; ++b) {
      double mx = -INFINITY;
      for (int k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(logits.at(b, i, k)));
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += (prob[k] = std::exp(logits.at(b, i, k) - mx));
      const double logz = std::log(z) + mx;
      part += logz - logits.at(b, i, labels[b]);
      for (int k = 0; k < K; ++k) {
        const double g = prob[k] / z - (k == labels[b] ? 1.0 : 0.0);
        out.grad.at(b, i, k) = static_cast<S>(g / B);
      }
    }
    out.value += part / B;
  }
  return out;
}

// Mean absolute error over all elements.
template <typename S>
LossWithGrad<S> recon_loss(const Tensor<S>& original, const Tensor<S>& reconstructed) {
  require(original.same_shape(reconstructed), "recon_loss: shape mismatch " + original.shape_str() + " vs " +
                                                   reconstructed.shape_str());
  require(!original.empty(), "recon_loss: empty input");
  LossWithGrad<S> out{0.0, Tensor<S>(original.shape())};
  const double inv = 1.0 / static_cast<double>(original.size());
  double s = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = static_cast<double>(reconstructed[i]) - original[i];
    s += std::abs(d);
    out.grad[i] = static_cast<S>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = s * inv;
  return out;
}

inline double joint_loss(double ce, double recon, const LossWeights& w) { return ce + w.lambda_recon * recon; }

// Mean sigmoid binary cross-entropy; flags are the positive (occluded) labels.
template <typename S>
LossWithGrad<S> occlusion_bce(const Tensor<S>& logits, const std::vector<bool>& flags) {
  require(logits.rank() == 1 && static_cast<std::size_t>(logits.dim(0)) == flags.size(),
          "occlusion_bce: one logit per flag required");
  require(!flags.empty(), "occlusion_bce: empty batch");
  const int B = logits.dim(0);
  LossWithGrad<S> out{0.0, Tensor<S>(logits.shape())};
  double s = 0.0;
  for (int b = 0; b < B; ++b) {
    const double x = logits[b];
    const double y = flags[b] ? 1.0 : 0.0;
    // log(1 + e^x) - y x, evaluated stably
    s += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - y * x;
    const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    out.grad[b] = static_cast<S>((sig - y) / B);
  }
  out.value = s / B;
  return out;
}

inline double total_loss(double joint_n, double joint_o, double l_d, double occ_bce, const LossWeights& w) {
  return w.alpha * (joint_n + joint_o) + (1.0 - w.alpha) * l_d + w.occ_cls_weight * occ_bce;
}

// Per-step decomposition of the objective.
struct LossBreakdown {
  double ce_teacher = 0, ce_student = 0;
  double recon_teacher = 0, recon_student = 0;
  double joint_teacher = 0, joint_student = 0;
  double l_d_wc = 0, l_d_bc = 0, l_global = 0, l_d = 0;
  double occ_bce = 0;
  double total = 0;

  template <typename F>
  void for_each_field(F&& f) {
    f("ce_teacher", ce_teacher);
    f("ce_student", ce_student);
    f("recon_teacher", recon_teacher);
    f("recon_student", recon_student);
    f("joint_teacher", joint_teacher);
    f("joint_student", joint_student);
    f("l_d_wc", l_d_wc);
    f("l_d_bc", l_d_bc);
    f("l_global", l_global);
    f("l_d", l_d);
    f("occ_bce", occ_bce);
    f("total", total);
  }
  template <typename F>
  void for_each_field(F&& f) const {
    const_cast<LossBreakdown*>(this)->for_each_field([&](const char* n, double& v) { f(n, static_cast<const double&>(v)); });
  }
};

}  // namespace hg::objective
