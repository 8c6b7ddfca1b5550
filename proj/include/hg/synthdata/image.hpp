#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "hg/error.hpp"
#include "hg/tensor.hpp"

namespace hg::synth {

enum class Domain { holistic, occluded };

struct ImageSize {
  int height = 64;
  int width = 32;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// An RGB image with its identity annotations. Pixels are stored HWC in [0,1].
struct LabeledImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;
  int identity = 0;
  int camera = 0;
  bool occluded_flag = false;
  Domain domain = Domain::holistic;

  LabeledImage() = default;
  LabeledImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  ImageSize size() const { return {height, width}; }

  double& px(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double px(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  void clamp() {
    for (auto& v : pixels) v = std::clamp(v, 0.0, 1.0);
  }
};

// Packs a list of images into an NCHW tensor.
template <typename S>
Tensor<S> to_batch(const std::vector<const LabeledImage*>& images) {
  require(!images.empty(), "to_batch: empty image list");
  const int h = images.front()->height;
  const int w = images.front()->width;
  Tensor<S> out({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& img = *images[b];
    require(img.height == h && img.width == w, "to_batch: images differ in size");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(b, c, y, x) = static_cast<S>(img.px(y, x, c));
  }
  return out;
}

template <typename S>
Tensor<S> to_batch(const std::vector<LabeledImage>& images) {
  std::vector<const LabeledImage*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return to_batch<S>(ptrs);
}

}  // namespace hg::synth
