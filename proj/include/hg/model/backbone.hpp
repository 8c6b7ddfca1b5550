#pragma once

#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/model/layers.hpp"
#include "hg/tensor.hpp"

namespace hg::model {

// Encoder E: blocks of (3x3 conv, batch-norm, relu).
template <typename S>
class Encoder {
 public:
  struct BlockCache {
    typename Conv2d<S>::Cache conv;
    typename BatchNorm<S>::Cache bn;
    Tensor<S> out;
  };
  using Cache = std::vector<BlockCache>;

  Encoder() = default;
  Encoder(const std::vector<int>& widths, const std::vector<int>& strides) {
    require(widths.size() == strides.size() && !widths.empty(), "Encoder: widths/strides mismatch");
    int in = 3;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::string n = "encoder." + std::to_string(i);
      convs_.emplace_back(n + ".conv", in, widths[i], strides[i]);
      bns_.emplace_back(n + ".bn", widths[i]);
      in = widths[i];
    }
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
  }

  std::size_t num_blocks() const { return convs_.size(); }
  Conv2d<S>& conv(std::size_t i) { return convs_[i]; }
  BatchNorm<S>& bn(std::size_t i) { return bns_[i]; }

  template <typename F>
  void for_each_param(F&& f) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].for_each_param(f);
      bns_[i].for_each_param(f);
    }
  }
  template <typename F>
  void for_each_buffer(F&& f) {
    for (auto& b : bns_) b.for_each_buffer(f);
  }

  Tensor<S> forward(const Tensor<S>& x, Mode mode, Cache& cache) {
    cache.assign(convs_.size(), {});
    Tensor<S> h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto& bc = cache[i];
      h = relu(bns_[i].forward(convs_[i].forward(h, bc.conv), mode, bc.bn));
      bc.out = h;
    }
    return h;
  }

  void backward(const Tensor<S>& dout, const Cache& cache) {
    Tensor<S> g = dout;
    for (std::size_t k = convs_.size(); k-- > 0;) {
      g = relu_backward(g, cache[k].out);
      g = bns_[k].backward(g, cache[k].bn);
      g = convs_[k].backward(g, cache[k].conv, k > 0);
    }
  }

 private:
  std::vector<Conv2d<S>> convs_;
  std::vector<BatchNorm<S>> bns_;
};

// Decoder D: mirror of the encoder. Each stride-2 encoder block maps to nearest-neighbour
// upsampling followed by a 3x3 conv; the last block ends in a sigmoid.
template <typename S>
class Decoder {
 public:
  struct BlockCache {
    bool upsampled = false;
    typename Conv2d<S>::Cache conv;
    typename BatchNorm<S>::Cache bn;
    Tensor<S> out;
  };
  using Cache = std::vector<BlockCache>;

  Decoder() = default;
  Decoder(const std::vector<int>& enc_widths, const std::vector<int>& enc_strides) {
    const std::size_t n = enc_widths.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t e = n - 1 - k;  // mirrored encoder block
      const int in = enc_widths[e];
      const int out = e == 0 ? 3 : enc_widths[e - 1];
      const std::string name = "decoder." + std::to_string(k);
      upsample_.push_back(enc_strides[e] == 2);
      convs_.emplace_back(name + ".conv", in, out, 1);
      if (e != 0) bns_.emplace_back(name + ".bn", out);
    }
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
  }

  std::size_t num_blocks() const { return convs_.size(); }
  Conv2d<S>& conv(std::size_t i) { return convs_[i]; }
  Conv2d<S>& final_conv() { return convs_.back(); }

  template <typename F>
  void for_each_param(F&& f) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].for_each_param(f);
      if (i < bns_.size()) bns_[i].for_each_param(f);
    }
  }
  template <typename F>
  void for_each_buffer(F&& f) {
    for (auto& b : bns_) b.for_each_buffer(f);
  }

  // Returns an NCHW image batch in (0,1).
  Tensor<S> forward(const Tensor<S>& fmap, Mode mode, Cache& cache) {
    require(fmap.rank() == 4 && fmap.dim(1) == convs_.front().in_channels(),
            "Decoder: feature map shape mismatch " + fmap.shape_str());
    cache.assign(convs_.size(), {});
    Tensor<S> h = fmap;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto& bc = cache[i];
      bc.upsampled = upsample_[i];
      h = bc.upsampled ? convs_[i].forward_upsampled(h, bc.conv) : convs_[i].forward(h, bc.conv);
      if (i + 1 < convs_.size())
        h = relu(bns_[i].forward(h, mode, bc.bn));
      else
        h = sigmoid(h);
      bc.out = h;
    }
    return h;
  }

  // Returns the gradient w.r.t. the feature map.
  Tensor<S> backward(const Tensor<S>& dout, const Cache& cache) {
    Tensor<S> g = dout;
    for (std::size_t k = convs_.size(); k-- > 0;) {
      if (k + 1 == convs_.size()) {
        g = sigmoid_backward(g, cache[k].out);
      } else {
        g = relu_backward(g, cache[k].out);
        g = bns_[k].backward(g, cache[k].bn);
      }
      g = cache[k].upsampled ? convs_[k].backward_upsampled(g, cache[k].conv) : convs_[k].backward(g, cache[k].conv);
    }
    return g;
  }

 private:
  std::vector<bool> upsample_;
  std::vector<Conv2d<S>> convs_;
  std::vector<BatchNorm<S>> bns_;
};

}  // namespace hg::model
