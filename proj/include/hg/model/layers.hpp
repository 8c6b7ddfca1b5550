#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hg/error.hpp"
#include "hg/rng.hpp"
#include "hg/tensor.hpp"

namespace hg::model {

enum class Mode { train, inference };

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;

// A trainable tensor together with its accumulated gradient.
template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.zero(); }
};

// A non-trainable state tensor (batch-norm running statistics).
template <typename S>
struct Buffer {
  std::string name;
  Tensor<S> value;
};

template <typename S>
void init_uniform(Tensor<S>& t, double bound, Rng& rng) {
  for (auto& v : t.vec()) v = static_cast<S>(uniform(rng, -bound, bound));
}

// 3x3 convolution with padding 1, computed by im2col + GEMM.
template <typename S>
class Conv2d {
 public:
  struct Cache {
    Tensor<S> input;
    int out_h = 0, out_w = 0;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int stride)
      : in_(in_channels), out_(out_channels), stride_(stride),
        weight_(name + ".weight", {out_channels, in_channels * 9}),
        bias_(name + ".bias", {out_channels}) {
    require(stride == 1 || stride == 2, "Conv2d: stride must be 1 or 2");
  }

  void init(Rng& rng) {
    init_uniform(weight_.value, std::sqrt(6.0 / (in_ * 9)), rng);
    bias_.value.zero();
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

  template <typename F>
  void for_each_param(F&& f) {
    f(weight_);
    f(bias_);
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& cache) const {
    require(x.rank() == 4 && x.dim(1) == in_, "Conv2d: expected input (B," + std::to_string(in_) + ",H,W), got " +
                                                  x.shape_str());
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int ho = (H - 1) / stride_ + 1, wo = (W - 1) / stride_ + 1;
    cache.input = x;
    cache.out_h = ho;
    cache.out_w = wo;
    const int hw = ho * wo;
    const int step = chunk(hw);
    Tensor<S> out({B, out_, ho, wo});
    const ConstMatMap<S> w(weight_.value.data(), out_, in_ * 9);
    RowMat<S> cols, y;
    for (int b0 = 0; b0 < B; b0 += step) {
      const int nb = std::min(step, B - b0);
      const std::size_t N = static_cast<std::size_t>(nb) * hw;
      im2col(x, b0, nb, ho, wo, cols);
      y.noalias() = w * cols;
      for (int b = 0; b < nb; ++b)
        for (int co = 0; co < out_; ++co) {
          const S bias = bias_.value[co];
          S* dst = out.data() + (static_cast<std::size_t>(b0 + b) * out_ + co) * hw;
          const S* src = y.data() + co * N + static_cast<std::size_t>(b) * hw;
          for (int i = 0; i < hw; ++i) dst[i] = src[i] + bias;
        }
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Cache& cache, bool need_input_grad = true) {
    const Tensor<S>& x = cache.input;
    const int B = x.dim(0);
    const int ho = cache.out_h, wo = cache.out_w, hw = ho * wo;
    require(dy.rank() == 4 && dy.dim(0) == B && dy.dim(1) == out_ && dy.dim(2) == ho && dy.dim(3) == wo,
            "Conv2d::backward: gradient shape mismatch");
    const int step = chunk(hw);
    const ConstMatMap<S> w(weight_.value.data(), out_, in_ * 9);
    MatMap<S> dw(weight_.grad.data(), out_, in_ * 9);
    Tensor<S> dx;
    if (need_input_grad) dx = Tensor<S>(x.shape());
    RowMat<S> g, cols, dcols;
    for (int b0 = 0; b0 < B; b0 += step) {
      const int nb = std::min(step, B - b0);
      const std::size_t N = static_cast<std::size_t>(nb) * hw;
      g.resize(out_, static_cast<Eigen::Index>(N));
      for (int b = 0; b < nb; ++b)
        for (int co = 0; co < out_; ++co) {
          const S* src = dy.data() + (static_cast<std::size_t>(b0 + b) * out_ + co) * hw;
          std::copy(src, src + hw, g.data() + co * N + static_cast<std::size_t>(b) * hw);
        }
      im2col(x, b0, nb, ho, wo, cols);
      dw.noalias() += g * cols.transpose();
      for (int co = 0; co < out_; ++co) bias_.grad[co] += g.row(co).sum();
      if (need_input_grad) {
        dcols.noalias() = w.transpose() * g;
        col2im(dcols, b0, nb, ho, wo, dx);
      }
    }
    return dx;
  }

  // Nearest 2x upsampling followed by this conv, evaluated at the input resolution:
  // each output phase (py, px) sees a 2x2 kernel made of summed 3x3 taps.
  Tensor<S> forward_upsampled(const Tensor<S>& x, Cache& cache) const {
    require(x.rank() == 4 && x.dim(1) == in_ && stride_ == 1,
            "Conv2d: expected input (B," + std::to_string(in_) + ",H,W), got " + x.shape_str());
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3), hw = H * W;
    cache.input = x;
    cache.out_h = 2 * H;
    cache.out_w = 2 * W;
    const int step = chunk(hw);
    Tensor<S> out({B, out_, 2 * H, 2 * W});
    RowMat<S> cols, y;
    for (int py = 0; py < 2; ++py)
      for (int px = 0; px < 2; ++px) {
        const RowMat<S> w = phase_weight(py, px);
        for (int b0 = 0; b0 < B; b0 += step) {
          const int nb = std::min(step, B - b0);
          const std::size_t N = static_cast<std::size_t>(nb) * hw;
          phase_im2col(x, b0, nb, py, px, cols);
          y.noalias() = w * cols;
          for (int b = 0; b < nb; ++b)
            for (int co = 0; co < out_; ++co) {
              const S bias = bias_.value[co];
              const S* src = y.data() + co * N + static_cast<std::size_t>(b) * hw;
              S* plane = out.data() + (static_cast<std::size_t>(b0 + b) * out_ + co) * 4 * hw;
              for (int i = 0; i < H; ++i) {
                S* dst = plane + static_cast<std::size_t>(2 * i + py) * 2 * W + px;
                for (int j = 0; j < W; ++j) dst[2 * j] = src[i * W + j] + bias;
              }
            }
        }
      }
    return out;
  }

  Tensor<S> backward_upsampled(const Tensor<S>& dy, const Cache& cache) {
    const Tensor<S>& x = cache.input;
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3), hw = H * W;
    require(dy.rank() == 4 && dy.dim(0) == B && dy.dim(1) == out_ && dy.dim(2) == 2 * H && dy.dim(3) == 2 * W,
            "Conv2d::backward: gradient shape mismatch");
    const int step = chunk(hw);
    Tensor<S> dx(x.shape());
    RowMat<S> g, cols, dcols, dw;
    for (int py = 0; py < 2; ++py)
      for (int px = 0; px < 2; ++px) {
        const RowMat<S> w = phase_weight(py, px);
        dw.setZero(out_, in_ * 4);
        for (int b0 = 0; b0 < B; b0 += step) {
          const int nb = std::min(step, B - b0);
          const std::size_t N = static_cast<std::size_t>(nb) * hw;
          g.resize(out_, static_cast<Eigen::Index>(N));
          for (int b = 0; b < nb; ++b)
            for (int co = 0; co < out_; ++co) {
              const S* plane = dy.data() + (static_cast<std::size_t>(b0 + b) * out_ + co) * 4 * hw;
              S* dst = g.data() + co * N + static_cast<std::size_t>(b) * hw;
              for (int i = 0; i < H; ++i) {
                const S* src = plane + static_cast<std::size_t>(2 * i + py) * 2 * W + px;
                for (int j = 0; j < W; ++j) dst[i * W + j] = src[2 * j];
              }
            }
          phase_im2col(x, b0, nb, py, px, cols);
          dw.noalias() += g * cols.transpose();
          for (int co = 0; co < out_; ++co) bias_.grad[co] += g.row(co).sum();
          dcols.noalias() = w.transpose() * g;
          phase_col2im(dcols, b0, nb, py, px, dx);
        }
        for (int co = 0; co < out_; ++co)
          for (int ci = 0; ci < in_; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                weight_.grad.data()[co * in_ * 9 + ci * 9 + ky * 3 + kx] +=
                    dw(co, ci * 4 + phase_tap(py, ky) * 2 + phase_tap(px, kx));
      }
    return dx;
  }

 private:
  // Images per GEMM, sized so the column buffer stays cache-resident.
  int chunk(int hw) const {
    const long per_image = static_cast<long>(in_) * 9 * hw;
    return static_cast<int>(std::max(1L, std::min(std::max(1L, 8192L / hw), (1L << 19) / per_image)));
  }

  // Output columns [lo, hi) whose input column ox*stride + kx - 1 lies inside [0, W).
  void valid_range(int kx, int W, int wo, int& lo, int& hi) const {
    lo = 0;
    while (lo < wo && lo * stride_ + kx - 1 < 0) ++lo;
    hi = wo;
    while (hi > lo && (hi - 1) * stride_ + kx - 1 >= W) --hi;
  }

  // Columns for images [b0, b0 + nb).
  void im2col(const Tensor<S>& x, int b0, int nb, int ho, int wo, RowMat<S>& cols) const {
    const int H = x.dim(2), W = x.dim(3);
    const std::size_t N = static_cast<std::size_t>(nb) * ho * wo;
    cols.resize(in_ * 9, static_cast<Eigen::Index>(N));
    for (int ci = 0; ci < in_; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          int lo, hi;
          valid_range(kx, W, wo, lo, hi);
          const int off = kx - 1;
          S* row = cols.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * N;
          for (int b = 0; b < nb; ++b) {
            const S* plane = x.data() + (static_cast<std::size_t>(b0 + b) * in_ + ci) * H * W;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ + ky - 1;
              S* dst = row + (static_cast<std::size_t>(b) * ho + oy) * wo;
              if (iy < 0 || iy >= H) {
                std::fill(dst, dst + wo, S(0));
                continue;
              }
              const S* src = plane + static_cast<std::size_t>(iy) * W;
              std::fill(dst, dst + lo, S(0));
              if (stride_ == 1) {
                std::copy(src + lo + off, src + hi + off, dst + lo);
              } else {
                for (int ox = lo; ox < hi; ++ox) dst[ox] = src[2 * ox + off];
              }
              std::fill(dst + hi, dst + wo, S(0));
            }
          }
        }
  }

  // Scatter-adds the columns of images [b0, b0 + nb) into dx.
  void col2im(const RowMat<S>& cols, int b0, int nb, int ho, int wo, Tensor<S>& dx) const {
    const int H = dx.dim(2), W = dx.dim(3);
    const std::size_t N = static_cast<std::size_t>(nb) * ho * wo;
    for (int ci = 0; ci < in_; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          int lo, hi;
          valid_range(kx, W, wo, lo, hi);
          const int off = kx - 1;
          const S* row = cols.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * N;
          for (int b = 0; b < nb; ++b) {
            S* plane = dx.data() + (static_cast<std::size_t>(b0 + b) * in_ + ci) * H * W;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ + ky - 1;
              if (iy < 0 || iy >= H) continue;
              const S* src = row + (static_cast<std::size_t>(b) * ho + oy) * wo;
              S* dst = plane + static_cast<std::size_t>(iy) * W;
              if (stride_ == 1) {
                for (int ox = lo; ox < hi; ++ox) dst[ox + off] += src[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox) dst[2 * ox + off] += src[ox];
              }
            }
          }
        }
  }

  // Which of the two low-resolution taps kernel index k lands on for output phase p.
  static int phase_tap(int p, int k) {
    const int u = p + k - 1;  // offset in the upsampled grid
    return (u < 0 ? -1 : u / 2) - (p - 1);
  }

  RowMat<S> phase_weight(int py, int px) const {
    RowMat<S> w = RowMat<S>::Zero(out_, in_ * 4);
    const S* src = weight_.value.data();
    for (int co = 0; co < out_; ++co)
      for (int ci = 0; ci < in_; ++ci)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            w(co, ci * 4 + phase_tap(py, ky) * 2 + phase_tap(px, kx)) += src[co * in_ * 9 + ci * 9 + ky * 3 + kx];
    return w;
  }

  // 2x2 columns of images [b0, b0 + nb): tap (a, c) reads x[i + py - 1 + a, j + px - 1 + c].
  void phase_im2col(const Tensor<S>& x, int b0, int nb, int py, int px, RowMat<S>& cols) const {
    const int H = x.dim(2), W = x.dim(3);
    const std::size_t N = static_cast<std::size_t>(nb) * H * W;
    cols.resize(in_ * 4, static_cast<Eigen::Index>(N));
    for (int ci = 0; ci < in_; ++ci)
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) {
          const int dy = py - 1 + a, dx = px - 1 + c;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          S* row = cols.data() + static_cast<std::size_t>(ci * 4 + a * 2 + c) * N;
          for (int b = 0; b < nb; ++b) {
            const S* plane = x.data() + (static_cast<std::size_t>(b0 + b) * in_ + ci) * H * W;
            for (int i = 0; i < H; ++i) {
              S* dst = row + (static_cast<std::size_t>(b) * H + i) * W;
              const int iy = i + dy;
              if (iy < 0 || iy >= H) {
                std::fill(dst, dst + W, S(0));
                continue;
              }
              const S* src = plane + static_cast<std::size_t>(iy) * W;
              std::fill(dst, dst + lo, S(0));
              std::copy(src + lo + dx, src + hi + dx, dst + lo);
              std::fill(dst + hi, dst + W, S(0));
            }
          }
        }
  }

  void phase_col2im(const RowMat<S>& cols, int b0, int nb, int py, int px, Tensor<S>& dxt) const {
    const int H = dxt.dim(2), W = dxt.dim(3);
    const std::size_t N = static_cast<std::size_t>(nb) * H * W;
    for (int ci = 0; ci < in_; ++ci)
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) {
          const int dy = py - 1 + a, dx = px - 1 + c;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          const S* row = cols.data() + static_cast<std::size_t>(ci * 4 + a * 2 + c) * N;
          for (int b = 0; b < nb; ++b) {
            S* plane = dxt.data() + (static_cast<std::size_t>(b0 + b) * in_ + ci) * H * W;
            for (int i = 0; i < H; ++i) {
              const int iy = i + dy;
              if (iy < 0 || iy >= H) continue;
              const S* src = row + (static_cast<std::size_t>(b) * H + i) * W;
              S* dst = plane + static_cast<std::size_t>(iy) * W;
              for (int j = lo; j < hi; ++j) dst[j + dx] += src[j];
            }
          }
        }
  }

  int in_ = 0, out_ = 0, stride_ = 1;
  Param<S> weight_, bias_;
};

// Batch normalization over an (N, C, M) view: statistics per channel across N*M.
// 4-D inputs are (B, C, H, W); 2-D inputs (N, C) are normalized per column.
template <typename S>
class BatchNorm {
 public:
  struct Cache {
    Tensor<S> xhat;
    std::vector<S> inv_std;
    Mode mode = Mode::train;
  };

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels)
      : c_(channels), gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
        running_mean_{name + ".running_mean", Tensor<S>({channels}, S(0))},
        running_var_{name + ".running_var", Tensor<S>({channels}, S(1))} {
    gamma_.value.fill(S(1));
  }

  Param<S>& gamma() { return gamma_; }
  Param<S>& beta() { return beta_; }
  Buffer<S>& running_mean() { return running_mean_; }
  Buffer<S>& running_var() { return running_var_; }

  template <typename F>
  void for_each_param(F&& f) {
    f(gamma_);
    f(beta_);
  }
  template <typename F>
  void for_each_buffer(F&& f) {
    f(running_mean_);
    f(running_var_);
  }

  Tensor<S> forward(const Tensor<S>& x, Mode mode, Cache& cache) {
    const auto [N, M] = view(x);
    cache.mode = mode;
    cache.xhat = Tensor<S>(x.shape());
    cache.inv_std.assign(static_cast<std::size_t>(c_), S(0));
    Tensor<S> y(x.shape());
    const double count = static_cast<double>(N) * M;
    for (int c = 0; c < c_; ++c) {
      double mean, var;
      if (mode == Mode::train) {
        double s = 0.0;
        for (int n = 0; n < N; ++n)
          for (int m = 0; m < M; ++m) s += x[idx(n, c, m, M)];
        mean = s / count;
        double v = 0.0;
        for (int n = 0; n < N; ++n)
          for (int m = 0; m < M; ++m) {
            const double d = x[idx(n, c, m, M)] - mean;
            v += d * d;
          }
        var = v / count;
        const double unbiased = count > 1 ? v / (count - 1.0) : var;
        running_mean_.value[c] = static_cast<S>((1.0 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
        running_var_.value[c] = static_cast<S>((1.0 - kMomentum) * running_var_.value[c] + kMomentum * unbiased);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const S inv = static_cast<S>(1.0 / std::sqrt(var + kEps));
      cache.inv_std[static_cast<std::size_t>(c)] = inv;
      const S g = gamma_.value[c], b = beta_.value[c], mu = static_cast<S>(mean);
      for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
          const std::size_t i = idx(n, c, m, M);
          const S xh = (x[i] - mu) * inv;
          cache.xhat[i] = xh;
          y[i] = g * xh + b;
        }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Cache& cache) {
    const auto [N, M] = view(dy);
    Tensor<S> dx(dy.shape());
    const double count = static_cast<double>(N) * M;
    for (int c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
          const std::size_t i = idx(n, c, m, M);
          sum_dy += dy[i];
          sum_dy_xh += static_cast<double>(dy[i]) * cache.xhat[i];
        }
      gamma_.grad[c] += static_cast<S>(sum_dy_xh);
      beta_.grad[c] += static_cast<S>(sum_dy);
      const double g = gamma_.value[c];
      const double inv = cache.inv_std[static_cast<std::size_t>(c)];
      for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
          const std::size_t i = idx(n, c, m, M);
          if (cache.mode == Mode::train)
            dx[i] = static_cast<S>(g * inv / count * (count * dy[i] - sum_dy - cache.xhat[i] * sum_dy_xh));
          else
            dx[i] = static_cast<S>(g * inv * dy[i]);
        }
    }
    return dx;
  }

 private:
  std::pair<int, int> view(const Tensor<S>& x) const {
    require((x.rank() == 4 || x.rank() == 2) && x.dim(1) == c_,
            "BatchNorm: expected (N," + std::to_string(c_) + ",...) input, got " + x.shape_str());
    const int N = x.dim(0);
    const int M = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    return {N, M};
  }
  std::size_t idx(int n, int c, int m, int M) const {
    return (static_cast<std::size_t>(n) * c_ + c) * M + m;
  }

  int c_ = 0;
  Param<S> gamma_, beta_;
  Buffer<S> running_mean_, running_var_;
};

// Affine map over the last axis: (N, in) -> (N, out).
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : in_(in), out_(out), weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {}

  void init(Rng& rng, double bound) {
    init_uniform(weight_.value, bound, rng);
    bias_.value.zero();
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }
  const Param<S>& weight() const { return weight_; }
  const Param<S>& bias() const { return bias_; }

  template <typename F>
  void for_each_param(F&& f) {
    f(weight_);
    f(bias_);
  }

  // x: N rows of width in (row-major), returns N x out.
  RowMat<S> forward(const Eigen::Ref<const RowMat<S>>& x) const {
    require(x.cols() == in_, "Linear: input width " + std::to_string(x.cols()) + " != " + std::to_string(in_));
    RowMat<S> y = x * ConstMatMap<S>(weight_.value.data(), out_, in_).transpose();
    y.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
    return y;
  }

  RowMat<S> backward(const Eigen::Ref<const RowMat<S>>& dy, const Eigen::Ref<const RowMat<S>>& x) {
    MatMap<S>(weight_.grad.data(), out_, in_).noalias() += dy.transpose() * x;
    Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias_.grad.data(), out_) += dy.colwise().sum();
    return dy * ConstMatMap<S>(weight_.value.data(), out_, in_);
  }

 private:
  int in_ = 0, out_ = 0;
  Param<S> weight_, bias_;
};

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> y = x;
  for (auto& v : y.vec()) v = v > S(0) ? v : S(0);
  return y;
}

// Gradient of relu given its output.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& dy, const Tensor<S>& y) {
  Tensor<S> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(y[i] > S(0))) dx[i] = S(0);
  return dx;
}

template <typename S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Tensor<S> y = x;
  for (auto& v : y.vec()) v = sigmoid(v);
  return y;
}

template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& dy, const Tensor<S>& y) {
  Tensor<S> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (S(1) - y[i]);
  return dx;
}

// Nearest-neighbour 2x upsampling of an NCHW tensor.
template <typename S>
Tensor<S> upsample2x(const Tensor<S>& x) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<S> y({B, C, 2 * H, 2 * W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < 2 * H; ++yy)
        for (int xx = 0; xx < 2 * W; ++xx) y.at(b, c, yy, xx) = x.at(b, c, yy / 2, xx / 2);
  return y;
}

template <typename S>
Tensor<S> upsample2x_backward(const Tensor<S>& dy) {
  const int B = dy.dim(0), C = dy.dim(1), H = dy.dim(2) / 2, W = dy.dim(3) / 2;
  Tensor<S> dx({B, C, H, W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < 2 * H; ++yy)
        for (int xx = 0; xx < 2 * W; ++xx) dx.at(b, c, yy / 2, xx / 2) += dy.at(b, c, yy, xx);
  return dx;
}

}  // namespace hg::model
