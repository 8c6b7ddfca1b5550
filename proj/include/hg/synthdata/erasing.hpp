#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include "hg/error.hpp"
#include "hg/rng.hpp"
#include "hg/synthdata/image.hpp"

namespace hg::synth {

enum class FillMode { uniform_random, mean_value };

struct ErasingParams {
  double probability = 1.0;
  double area_min = 0.1;
  double area_max = 0.35;
  double aspect_min = 0.3;
  double aspect_max = 3.33;
  FillMode fill = FillMode::uniform_random;

  void validate() const {
    require(probability >= 0.0 && probability <= 1.0, "ErasingParams: probability must lie in [0,1]");
    require(area_min > 0.0 && area_max < 1.0 && area_min <= area_max,
            "ErasingParams: area range must satisfy 0 < min <= max < 1");
    require(aspect_min > 0.0 && aspect_min <= aspect_max, "ErasingParams: aspect range must satisfy 0 < min <= max");
  }
};

// Rectangle in pixel coordinates, [top, top+height) x [left, left+width).
struct EraseRect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

// Samples the rectangle; sides are rounded up and clipped to the image.
inline EraseRect sample_erase_rect(int H, int W, const ErasingParams& params, Rng& rng) {
  const double area = uniform(rng, params.area_min, params.area_max) * H * W;
  const double log_aspect = uniform(rng, std::log(params.aspect_min), std::log(params.aspect_max));
  const double aspect = std::exp(log_aspect);  // height / width
  EraseRect r;
  r.height = std::clamp(static_cast<int>(std::ceil(std::sqrt(area * aspect) - 1e-9)), 1, H);
  r.width = std::clamp(static_cast<int>(std::ceil(std::sqrt(area / aspect) - 1e-9)), 1, W);
  r.top = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(H - r.height + 1)));
  r.left = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(W - r.width + 1)));
  return r;
}

// Returns an occluded-domain copy of `image`. With probability `params.probability` one
// rectangle is overwritten; occluded_flag records whether that happened.
inline LabeledImage apply_random_erasing(const LabeledImage& image, const ErasingParams& params, std::uint64_t seed,
                                         EraseRect* applied = nullptr) {
  params.validate();
  LabeledImage out = image;
  out.domain = Domain::occluded;
  out.occluded_flag = false;
  Rng rng(derive_seed({seed, 0xe4a5eULL}));
  if (uniform01(rng) >= params.probability) return out;

  const EraseRect r = sample_erase_rect(image.height, image.width, params, rng);
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  if (params.fill == FillMode::mean_value) {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        for (int c = 0; c < 3; ++c) mean[c] += image.px(y, x, c);
    for (auto& m : mean) m /= static_cast<double>(image.height) * image.width;
  }
  for (int y = r.top; y < r.top + r.height; ++y)
    for (int x = r.left; x < r.left + r.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.px(y, x, c) = params.fill == FillMode::uniform_random ? uniform01(rng) : mean[c];
  out.occluded_flag = true;
  if (applied) *applied = r;
  return out;
}

}  // namespace hg::synth
