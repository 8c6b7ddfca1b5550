#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "hg/error.hpp"
#include "hg/rng.hpp"
#include "hg/synthdata/image.hpp"

namespace hg::train {

// A training image list with identities remapped to contiguous class indices.
struct LabeledSet {
  std::vector<synth::LabeledImage> images;
  std::vector<int> class_of;               // per image
  std::vector<int> identity_of_class;      // class -> original identity
  std::vector<std::vector<int>> members;   // class -> image indices

  int num_classes() const { return static_cast<int>(identity_of_class.size()); }

  static LabeledSet from_images(std::vector<synth::LabeledImage> imgs) {
    LabeledSet s;
    s.images = std::move(imgs);
    std::map<int, int> cls;
    for (const auto& im : s.images) cls.emplace(im.identity, 0);
    int k = 0;
    for (auto& [id, c] : cls) {
      c = k++;
      s.identity_of_class.push_back(id);
    }
    s.members.assign(cls.size(), {});
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      const int c = cls[s.images[i].identity];
      s.class_of.push_back(c);
      s.members[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    return s;
  }
};

struct PkBatch {
  std::vector<int> indices;  // into LabeledSet::images, P groups of K
  std::vector<int> labels;   // class indices
};

// P distinct classes, K instances each (with replacement only when a class has fewer than K).
inline PkBatch pk_sample_batch(const LabeledSet& set, int P, int K, Rng& rng) {
  require(P >= 1 && K >= 1, "pk_sample_batch: P and K must be positive");
  require(set.num_classes() >= P, "pk_sample_batch: dataset has " + std::to_string(set.num_classes()) +
                                      " identities, fewer than P=" + std::to_string(P));
  std::vector<int> classes(static_cast<std::size_t>(set.num_classes()));
  for (int c = 0; c < set.num_classes(); ++c) classes[static_cast<std::size_t>(c)] = c;
  for (int i = 0; i < P; ++i) {
    const auto j = static_cast<std::size_t>(i) + uniform_index(rng, classes.size() - static_cast<std::size_t>(i));
    std::swap(classes[static_cast<std::size_t>(i)], classes[j]);
  }
  PkBatch b;
  for (int i = 0; i < P; ++i) {
    const int c = classes[static_cast<std::size_t>(i)];
    std::vector<int> pool = set.members[static_cast<std::size_t>(c)];
    require(!pool.empty(), "pk_sample_batch: empty class");
    if (static_cast<int>(pool.size()) >= K) {
      for (int k = 0; k < K; ++k) {
        const auto j = static_cast<std::size_t>(k) + uniform_index(rng, pool.size() - static_cast<std::size_t>(k));
        std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
        b.indices.push_back(pool[static_cast<std::size_t>(k)]);
        b.labels.push_back(c);
      }
    } else {
      for (int k = 0; k < K; ++k) {
        b.indices.push_back(pool[uniform_index(rng, pool.size())]);
        b.labels.push_back(c);
      }
    }
  }
  return b;
}

}  // namespace hg::train
