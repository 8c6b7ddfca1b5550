#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hg/error.hpp"
#include "hg/rng.hpp"

namespace hg::synth {

inline constexpr int kNumPatterns = 4;

// Appearance parameters of one synthetic identity.
struct IdentityAppearance {
  std::array<double, 3> base_color{};  // torso
  std::array<double, 3> leg_color{};
  double head_tone = 0.5;
  int torso_pattern = 0;
  int leg_pattern = 0;
  double height_scale = 1.0;  // [0.7, 1.3]
  double width_scale = 1.0;   // [0.7, 1.3]

  friend bool operator==(const IdentityAppearance&, const IdentityAppearance&) = default;
};

struct IdentityAtlas {
  int num_identities = 0;
  std::uint64_t seed = 0;
  std::vector<IdentityAppearance> identities;

  friend bool operator==(const IdentityAtlas&, const IdentityAtlas&) = default;
};

namespace detail {

inline double color_gap(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double m = 0.0;
  for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(a[c] - b[c]));
  return m;
}

// Two identities are too close when they share both patterns and both colors are near.
inline bool too_close(const IdentityAppearance& a, const IdentityAppearance& b) {
  return a.torso_pattern == b.torso_pattern && a.leg_pattern == b.leg_pattern &&
         color_gap(a.base_color, b.base_color) < 0.15 && color_gap(a.leg_color, b.leg_color) < 0.15;
}

}  // namespace detail

inline IdentityAtlas generate_atlas(int num_identities, std::uint64_t seed) {
  require(num_identities >= 2, "generate_atlas: num_identities must be >= 2");
  IdentityAtlas atlas;
  atlas.num_identities = num_identities;
  atlas.seed = seed;
  Rng rng(derive_seed({seed, 0xa71a5ULL}));
  while (static_cast<int>(atlas.identities.size()) < num_identities) {
    IdentityAppearance a;
    for (auto& v : a.base_color) v = uniform(rng, 0.05, 0.95);
    for (auto& v : a.leg_color) v = uniform(rng, 0.05, 0.95);
    a.head_tone = uniform(rng, 0.35, 0.85);
    a.torso_pattern = static_cast<int>(uniform_index(rng, kNumPatterns));
    a.leg_pattern = static_cast<int>(uniform_index(rng, kNumPatterns));
    a.height_scale = uniform(rng, 0.7, 1.3);
    a.width_scale = uniform(rng, 0.7, 1.3);
    bool ok = true;
    for (const auto& prev : atlas.identities)
      if (prev == a || detail::too_close(prev, a)) ok = false;
    if (ok) atlas.identities.push_back(a);
  }
  return atlas;
}

}  // namespace hg::synth
