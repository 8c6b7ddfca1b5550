#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/model/layers.hpp"
#include "hg/tensor.hpp"

namespace hg::model {

// Attention embedding shared by all parts:
//   A = sigmoid(BN(W2 relu(W1 f + b1) + b2)), BN statistics pooled over the B*p rows.
template <typename S>
class AttentionEmbedding {
 public:
  struct Cache {
    RowMat<S> input;   // (B*p, C)
    RowMat<S> hidden;  // relu output, (B*p, C/r)
    typename BatchNorm<S>::Cache bn;
    Tensor<S> out;  // (B, p, C)
  };

  AttentionEmbedding() = default;
  AttentionEmbedding(int channels, int reduction) : c_(channels) {
    require(reduction >= 1 && channels % reduction == 0,
            "AttentionEmbedding: C=" + std::to_string(channels) + " is not divisible by r=" + std::to_string(reduction));
    fc1_ = Linear<S>("attention.fc1", channels, channels / reduction);
    fc2_ = Linear<S>("attention.fc2", channels / reduction, channels);
    bn_ = BatchNorm<S>("attention.bn", channels);
  }

  void init(Rng& rng) {
    fc1_.init(rng, std::sqrt(6.0 / fc1_.in_features()));
    fc2_.init(rng, std::sqrt(3.0 / fc2_.in_features()));
  }

  Linear<S>& fc1() { return fc1_; }
  Linear<S>& fc2() { return fc2_; }
  BatchNorm<S>& bn() { return bn_; }

  template <typename F>
  void for_each_param(F&& f) {
    fc1_.for_each_param(f);
    fc2_.for_each_param(f);
    bn_.for_each_param(f);
  }
  template <typename F>
  void for_each_buffer(F&& f) {
    bn_.for_each_buffer(f);
  }

  Tensor<S> forward(const Tensor<S>& parts, Mode mode, Cache& cache) {
    require(parts.rank() == 3 && parts.dim(2) == c_, "AttentionEmbedding: expected (B,p," + std::to_string(c_) +
                                                         ") parts, got " + parts.shape_str());
    const int rows = parts.dim(0) * parts.dim(1);
    cache.input = ConstMatMap<S>(parts.data(), rows, c_);
    cache.hidden = fc1_.forward(cache.input).cwiseMax(S(0));
    RowMat<S> z = fc2_.forward(cache.hidden);
    Tensor<S> zt({rows, c_}, std::vector<S>(z.data(), z.data() + z.size()));
    Tensor<S> a = sigmoid(bn_.forward(zt, mode, cache.bn));
    a.reshape(parts.shape());
    cache.out = a;
    return a;
  }

  Tensor<S> backward(const Tensor<S>& dA, const Cache& cache) {
    const int rows = static_cast<int>(cache.input.rows());
    Tensor<S> g = sigmoid_backward(dA, cache.out);
    g.reshape({rows, c_});
    g = bn_.backward(g, cache.bn);
    RowMat<S> dh = fc2_.backward(ConstMatMap<S>(g.data(), rows, c_), cache.hidden);
    dh = (cache.hidden.array() > S(0)).select(dh.array(), S(0)).matrix();
    RowMat<S> dx = fc1_.backward(dh, cache.input);
    return Tensor<S>(cache.out.shape(), std::vector<S>(dx.data(), dx.data() + dx.size()));
  }

 private:
  int c_ = 0;
  Linear<S> fc1_, fc2_;
  BatchNorm<S> bn_;
};

// p independent affine classifiers, one per part: (B, p, C) -> (B, p, K).
template <typename S>
class PartClassifiers {
 public:
  PartClassifiers() = default;
  PartClassifiers(const std::string& name, int parts, int channels, int classes) : c_(channels), k_(classes) {
    require(classes >= 1, "PartClassifiers: need at least one class");
    for (int i = 0; i < parts; ++i) heads_.emplace_back(name + "." + std::to_string(i), channels, classes);
  }

  void init(Rng& rng) {
    for (auto& h : heads_) h.init(rng, 1.0 / std::sqrt(static_cast<double>(c_)));
  }

  int num_parts() const { return static_cast<int>(heads_.size()); }
  int num_classes() const { return k_; }
  Linear<S>& head(int i) { return heads_[static_cast<std::size_t>(i)]; }

  template <typename F>
  void for_each_param(F&& f) {
    for (auto& h : heads_) h.for_each_param(f);
  }

  Tensor<S> forward(const Tensor<S>& parts) const {
    require(parts.rank() == 3 && parts.dim(1) == num_parts() && parts.dim(2) == c_,
            "PartClassifiers: expected (B," + std::to_string(num_parts()) + "," + std::to_string(c_) + ") parts, got " +
                parts.shape_str());
    const int B = parts.dim(0), p = num_parts();
    Tensor<S> logits({B, p, k_});
    for (int i = 0; i < p; ++i) {
      const RowMat<S> y = heads_[static_cast<std::size_t>(i)].forward(slice(parts, i));
      for (int b = 0; b < B; ++b)
        for (int k = 0; k < k_; ++k) logits.at(b, i, k) = y(b, k);
    }
    return logits;
  }

  Tensor<S> backward(const Tensor<S>& dlogits, const Tensor<S>& parts) {
    const int B = parts.dim(0), p = num_parts();
    Tensor<S> dparts(parts.shape());
    for (int i = 0; i < p; ++i) {
      RowMat<S> dy(B, k_);
      for (int b = 0; b < B; ++b)
        for (int k = 0; k < k_; ++k) dy(b, k) = dlogits.at(b, i, k);
      const RowMat<S> dx = heads_[static_cast<std::size_t>(i)].backward(dy, slice(parts, i));
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < c_; ++c) dparts.at(b, i, c) = dx(b, c);
    }
    return dparts;
  }

 private:
  RowMat<S> slice(const Tensor<S>& parts, int i) const {
    const int B = parts.dim(0);
    RowMat<S> x(B, c_);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < c_; ++c) x(b, c) = parts.at(b, i, c);
    return x;
  }

  int c_ = 0, k_ = 0;
  std::vector<Linear<S>> heads_;
};

// Binary occluded/holistic classifier on the globally pooled feature: (B, C) -> (B).
template <typename S>
class OcclusionClassifier {
 public:
  OcclusionClassifier() = default;
  explicit OcclusionClassifier(int channels) : fc_("occlusion.fc", channels, 1) {}

  void init(Rng& rng) { fc_.init(rng, 1.0 / std::sqrt(static_cast<double>(fc_.in_features()))); }

  Linear<S>& fc() { return fc_; }

  template <typename F>
  void for_each_param(F&& f) {
    fc_.for_each_param(f);
  }

  Tensor<S> forward(const Tensor<S>& global) const {
    require(global.rank() == 2 && global.dim(1) == fc_.in_features(),
            "OcclusionClassifier: expected (B," + std::to_string(fc_.in_features()) + ") input, got " +
                global.shape_str());
    const RowMat<S> y = fc_.forward(ConstMatMap<S>(global.data(), global.dim(0), global.dim(1)));
    return Tensor<S>({global.dim(0)}, std::vector<S>(y.data(), y.data() + y.size()));
  }

  Tensor<S> backward(const Tensor<S>& dlogits, const Tensor<S>& global) {
    const RowMat<S> dx = fc_.backward(ConstMatMap<S>(dlogits.data(), dlogits.dim(0), 1),
                                      ConstMatMap<S>(global.data(), global.dim(0), global.dim(1)));
    return Tensor<S>(global.shape(), std::vector<S>(dx.data(), dx.data() + dx.size()));
  }

 private:
  Linear<S> fc_;
};

}  // namespace hg::model
