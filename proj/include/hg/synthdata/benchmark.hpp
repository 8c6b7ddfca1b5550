#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/rng.hpp"
#include "hg/synthdata/atlas.hpp"
#include "hg/synthdata/dataset_io.hpp"
#include "hg/synthdata/erasing.hpp"
#include "hg/synthdata/render.hpp"

namespace hg::synth {

struct BenchmarkConfig {
  int num_identities = 50;
  int train_per_id = 20;
  int gallery_per_id = 5;
  int query_per_id = 5;
  int num_cameras = 3;
  ImageSize image{64, 32};
  std::uint64_t seed = 0;
  ErasingParams occlusion;     // erased query / train splits
  bool occluded_query = true;  // emit query_occluded
  bool occluded_train = false; // emit train_occluded (separate occluded training folder)

  void validate() const {
    require(num_identities >= 2, "data.num_identities must be >= 2");
    require(train_per_id >= 1, "data.train_per_id must be >= 1");
    require(gallery_per_id >= 1 && query_per_id >= 1, "data.gallery_per_id and data.query_per_id must be >= 1");
    require(num_cameras >= 2, "data.num_cameras must be >= 2");
    require(image.height >= 8 && image.width >= 4, "data image size too small");
    occlusion.validate();
  }
};

struct Benchmark {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> gallery;
  std::vector<LabeledImage> query;
  std::vector<LabeledImage> query_occluded;
  std::vector<LabeledImage> train_occluded;
};

inline const char* kQueryOccluded = "query_occluded";
inline const char* kTrainOccluded = "train_occluded";

// Round-trips pixels through 8 bits so in-memory sets equal what is read back from disk.
inline LabeledImage quantized(LabeledImage img) {
  for (auto& v : img.pixels) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
  return img;
}

inline Benchmark build_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const IdentityAtlas atlas = generate_atlas(cfg.num_identities, cfg.seed);
  Benchmark b;
  enum : std::uint64_t { kTrain = 1, kGallery = 2, kQuery = 3, kTrainOcc = 4, kEraseQ = 5, kEraseT = 6 };
  const auto render = [&](int id, int cam, std::uint64_t split, int j) {
    return quantized(render_sample(atlas, id, cam,
                                   derive_seed({cfg.seed, split, static_cast<std::uint64_t>(id),
                                                static_cast<std::uint64_t>(j)}),
                                   cfg.image));
  };
  for (int id = 0; id < cfg.num_identities; ++id) {
    for (int j = 0; j < cfg.train_per_id; ++j) b.train.push_back(render(id, j % cfg.num_cameras, kTrain, j));
    for (int j = 0; j < cfg.gallery_per_id; ++j) b.gallery.push_back(render(id, j % cfg.num_cameras, kGallery, j));
    for (int j = 0; j < cfg.query_per_id; ++j) {
      LabeledImage q = render(id, (j + 1) % cfg.num_cameras, kQuery, j);
      if (cfg.occluded_query) {
        const auto s = derive_seed({cfg.seed, kEraseQ, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(j)});
        b.query_occluded.push_back(quantized(apply_random_erasing(q, cfg.occlusion, s)));
      }
      b.query.push_back(std::move(q));
    }
    if (cfg.occluded_train) {
      for (int j = 0; j < cfg.train_per_id; ++j) {
        const LabeledImage t = render(id, j % cfg.num_cameras, kTrainOcc, j);
        const auto s = derive_seed({cfg.seed, kEraseT, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(j)});
        b.train_occluded.push_back(quantized(apply_random_erasing(t, cfg.occlusion, s)));
      }
    }
  }
  return b;
}

inline void write_benchmark(const std::filesystem::path& root, const Benchmark& b) {
  write_split(root, Split::train, b.train);
  write_split(root, Split::gallery, b.gallery);
  write_split(root, Split::query, b.query);
  if (!b.query_occluded.empty()) write_image_dir(root / kQueryOccluded, b.query_occluded);
  if (!b.train_occluded.empty()) write_image_dir(root / kTrainOccluded, b.train_occluded);
}

}  // namespace hg::synth
