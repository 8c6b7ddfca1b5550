#pragma once

#include <utility>
#include <vector>

#include "hg/error.hpp"
#include "hg/tensor.hpp"

namespace hg::model {

// Row range [begin, end) of horizontal stripe `part` when `h` rows are split into `p` stripes.
inline std::pair<int, int> stripe_rows(int h, int p, int part) {
  require(p >= 1 && h % p == 0, "stripe_rows: h=" + std::to_string(h) + " is not divisible by p=" + std::to_string(p));
  const int rows = h / p;
  return {part * rows, (part + 1) * rows};
}

// (B, C, h, w) -> (B, p, C): mean of every horizontal stripe.
template <typename S>
Tensor<S> part_pool(const Tensor<S>& map, int p) {
  require(map.rank() == 4, "part_pool: expected a (B,C,h,w) map, got " + map.shape_str());
  const int B = map.dim(0), C = map.dim(1), h = map.dim(2), w = map.dim(3);
  require(p >= 1 && h % p == 0, "part_pool: h=" + std::to_string(h) + " is not divisible by p=" + std::to_string(p));
  const int rows = h / p;
  const double inv = 1.0 / (static_cast<double>(rows) * w);
  Tensor<S> out({B, p, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const S* plane = map.data() + (static_cast<std::size_t>(b) * C + c) * h * w;
      for (int i = 0; i < p; ++i) {
        double s = 0.0;
        for (int y = i * rows; y < (i + 1) * rows; ++y)
          for (int x = 0; x < w; ++x) s += plane[y * w + x];
        out.at(b, i, c) = static_cast<S>(s * inv);
      }
    }
  return out;
}

template <typename S>
void part_pool_backward(const Tensor<S>& dparts, Tensor<S>& dmap) {
  const int B = dmap.dim(0), C = dmap.dim(1), h = dmap.dim(2), w = dmap.dim(3);
  const int p = dparts.dim(1);
  require(dparts.dim(0) == B && dparts.dim(2) == C && h % p == 0, "part_pool_backward: shape mismatch");
  const int rows = h / p;
  const S inv = static_cast<S>(1.0 / (static_cast<double>(rows) * w));
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      S* plane = dmap.data() + (static_cast<std::size_t>(b) * C + c) * h * w;
      for (int i = 0; i < p; ++i) {
        const S g = dparts.at(b, i, c) * inv;
        for (int y = i * rows; y < (i + 1) * rows; ++y)
          for (int x = 0; x < w; ++x) plane[y * w + x] += g;
      }
    }
}

// (B, C, h, w) -> (B, C) spatial mean.
template <typename S>
Tensor<S> global_pool(const Tensor<S>& map) {
  Tensor<S> g = part_pool(map, 1);
  g.reshape({map.dim(0), map.dim(1)});
  return g;
}

template <typename S>
void global_pool_backward(const Tensor<S>& dglobal, Tensor<S>& dmap) {
  Tensor<S> d = dglobal;
  d.reshape({dglobal.dim(0), 1, dglobal.dim(1)});
  part_pool_backward(d, dmap);
}

// Attended part features: elementwise product of parts and attention.
template <typename S>
Tensor<S> apply_attention(const Tensor<S>& parts, const Tensor<S>& attention) {
  require(parts.same_shape(attention), "apply_attention: shape mismatch " + parts.shape_str() + " vs " +
                                           attention.shape_str());
  Tensor<S> out(parts.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = parts[i] * attention[i];
  return out;
}

}  // namespace hg::model
