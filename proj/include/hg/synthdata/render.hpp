#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "hg/error.hpp"
#include "hg/rng.hpp"
#include "hg/synthdata/atlas.hpp"
#include "hg/synthdata/image.hpp"

namespace hg::synth {

// Per-camera colour response: out = gain * in + bias, channelwise.
struct CameraResponse {
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};
  double background = 0.5;
};

inline CameraResponse camera_response(std::uint64_t atlas_seed, int camera) {
  Rng rng(derive_seed({atlas_seed, 0xca3e7aULL, static_cast<std::uint64_t>(camera)}));
  CameraResponse r;
  for (int c = 0; c < 3; ++c) {
    r.gain[c] = uniform(rng, 0.85, 1.15);
    r.bias[c] = uniform(rng, -0.05, 0.05);
  }
  r.background = uniform(rng, 0.3, 0.7);
  return r;
}

namespace detail {

inline std::array<double, 3> shade(const std::array<double, 3>& c, double f) {
  return {c[0] * f, c[1] * f, c[2] * f};
}

// Pattern value at local coordinates (u, v) in [0,1]^2 of a body region.
inline std::array<double, 3> patterned(const std::array<double, 3>& color, int pattern, double u, double v,
                                       int rows, int cols) {
  switch (pattern) {
    case 1: {  // horizontal stripes
      const int band = static_cast<int>(v * rows / 3.0);
      return band % 2 ? shade(color, 0.55) : color;
    }
    case 2: {  // vertical stripes
      const int band = static_cast<int>(u * cols / 3.0);
      return band % 2 ? shade(color, 0.55) : color;
    }
    case 3:  // two-tone, lower half lighter
      return v < 0.5 ? color
                     : std::array<double, 3>{0.5 + 0.5 * color[0], 0.5 + 0.5 * color[1], 0.5 + 0.5 * color[2]};
    default:
      return color;
  }
}

}  // namespace detail

// Renders one holistic view of `identity` seen by `camera`. The jitter seed moves and
// rescales the figure slightly and redraws the background noise.
inline LabeledImage render_sample(const IdentityAtlas& atlas, int identity, int camera, std::uint64_t jitter_seed,
                                  ImageSize size = {}) {
  require(identity >= 0 && identity < atlas.num_identities, "render_sample: identity out of range");
  require(size.height >= 8 && size.width >= 4, "render_sample: image too small");
  const auto& app = atlas.identities[static_cast<std::size_t>(identity)];
  const CameraResponse cam = camera_response(atlas.seed, camera);
  Rng rng(derive_seed({atlas.seed, static_cast<std::uint64_t>(identity), static_cast<std::uint64_t>(camera),
                       jitter_seed}));

  const int H = size.height;
  const int W = size.width;
  const double dx = uniform(rng, -0.08, 0.08) * W;
  const double dy = uniform(rng, -0.03, 0.03) * H;
  const double jscale = uniform(rng, 0.95, 1.05);
  const double illum = uniform(rng, 0.92, 1.08);

  const double body_h = H * (0.74 + 0.16 * (app.height_scale - 0.7) / 0.6) * jscale;
  const double top = 0.5 * (H - body_h) + dy;
  const double cx = 0.5 * W + dx;
  const double torso_w = W * 0.42 * app.width_scale * jscale;
  const double leg_w = torso_w * 0.42;
  const double head_r = body_h * 0.085;
  const double head_cy = top + head_r;
  const double torso_top = top + 2.0 * head_r;
  const double torso_bot = top + 0.52 * body_h;
  const double bottom = top + body_h;

  LabeledImage img(H, W);
  img.identity = identity;
  img.camera = camera;
  img.occluded_flag = false;
  img.domain = Domain::holistic;

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double fy = y + 0.5;
      const double fx = x + 0.5;
      std::array<double, 3> col;
      const double bg = cam.background + uniform(rng, -0.12, 0.12);
      col = {bg, bg * 0.95, bg * 1.05};

      const double hx = (fx - cx) / (head_r * 0.85);
      const double hy = (fy - head_cy) / head_r;
      if (hx * hx + hy * hy <= 1.0) {
        col = {app.head_tone, app.head_tone * 0.8, app.head_tone * 0.65};
      } else if (fy >= torso_top && fy < torso_bot && std::abs(fx - cx) <= 0.5 * torso_w) {
        const double u = (fx - (cx - 0.5 * torso_w)) / torso_w;
        const double v = (fy - torso_top) / (torso_bot - torso_top);
        col = detail::patterned(app.base_color, app.torso_pattern, u, v,
                                static_cast<int>(torso_bot - torso_top), static_cast<int>(torso_w));
      } else if (fy >= torso_bot && fy < bottom) {
        const double gap = 0.5 * (torso_w - 2.0 * leg_w);
        const double left0 = cx - 0.5 * torso_w;
        const bool left_leg = fx >= left0 && fx < left0 + leg_w;
        const bool right_leg = fx >= left0 + leg_w + 2.0 * gap && fx < left0 + 2.0 * leg_w + 2.0 * gap;
        if (left_leg || right_leg) {
          const double u = left_leg ? (fx - left0) / leg_w : (fx - left0 - leg_w - 2.0 * gap) / leg_w;
          const double v = (fy - torso_bot) / (bottom - torso_bot);
          col = detail::patterned(app.leg_color, app.leg_pattern, u, v, static_cast<int>(bottom - torso_bot),
                                  static_cast<int>(leg_w));
        }
      }
      for (int c = 0; c < 3; ++c)
        img.px(y, x, c) = cam.gain[c] * col[c] * illum + cam.bias[c] + uniform(rng, -0.02, 0.02);
    }
  }
  img.clamp();
  return img;
}

}  // namespace hg::synth
