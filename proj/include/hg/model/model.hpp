#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/model/backbone.hpp"
#include "hg/model/heads.hpp"
#include "hg/model/layers.hpp"
#include "hg/model/parts.hpp"
#include "hg/synthdata/image.hpp"

namespace hg::model {

struct ModelConfig {
  synth::ImageSize image{64, 32};
  std::vector<int> widths{32, 64, 128, 128};  // last entry is C
  std::vector<int> strides{2, 2, 2, 1};
  int parts = 4;
  int reduction = 4;
  int teacher_classes = 2;
  int student_classes = 2;
  std::uint64_t init_seed = 0;

  int channels() const { return widths.back(); }
  int downsample() const {
    return std::accumulate(strides.begin(), strides.end(), 1, std::multiplies<>());
  }
  int feature_h() const { return image.height / downsample(); }
  int feature_w() const { return image.width / downsample(); }

  void validate() const {
    require(!widths.empty() && widths.size() == strides.size(), "model: widths and strides must have equal length");
    for (int w : widths) require(w >= 1, "model: channel widths must be positive");
    for (int s : strides) require(s == 1 || s == 2, "model: strides must be 1 or 2");
    require(image.height % downsample() == 0 && image.width % downsample() == 0,
            "model: image size must be divisible by the encoder downsampling factor");
    require(parts >= 1 && feature_h() % parts == 0,
            "model: feature height h=" + std::to_string(feature_h()) + " is not divisible by parts p=" +
                std::to_string(parts));
    require(reduction >= 1 && channels() % reduction == 0, "model: C must be divisible by the attention reduction r");
    require(teacher_classes >= 1 && student_classes >= 1, "model: class counts must be positive");
  }
};

enum class Group { encoder, decoder, attention, teacher_classifier, student_classifier, occlusion_classifier };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::encoder: return "encoder";
    case Group::decoder: return "decoder";
    case Group::attention: return "attention";
    case Group::teacher_classifier: return "teacher_classifier";
    case Group::student_classifier: return "student_classifier";
    case Group::occlusion_classifier: return "occlusion_classifier";
  }
  return "?";
}

// All trainable components. The encoder and decoder are shared by the teacher
// (holistic) and student (occluded) branches; classifiers are per branch.
template <typename S>
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& cfg)
      : cfg_(cfg),
        encoder_((cfg.validate(), cfg.widths), cfg.strides),
        decoder_(cfg.widths, cfg.strides),
        attention_(cfg.channels(), cfg.reduction),
        teacher_cls_("teacher_classifier", cfg.parts, cfg.channels(), cfg.teacher_classes),
        student_cls_("student_classifier", cfg.parts, cfg.channels(), cfg.student_classes),
        occ_cls_(cfg.channels()) {
    Rng rng(derive_seed({cfg.init_seed, 0x10de1ULL}));
    encoder_.init(rng);
    decoder_.init(rng);
    attention_.init(rng);
    teacher_cls_.init(rng);
    student_cls_.init(rng);
    occ_cls_.init(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  Encoder<S>& encoder() { return encoder_; }
  Decoder<S>& decoder() { return decoder_; }
  AttentionEmbedding<S>& attention() { return attention_; }
  PartClassifiers<S>& teacher_classifier() { return teacher_cls_; }
  PartClassifiers<S>& student_classifier() { return student_cls_; }
  OcclusionClassifier<S>& occlusion_classifier() { return occ_cls_; }

  // f(Group, Param<S>&) for every trainable tensor, in a fixed order.
  template <typename F>
  void for_each_param(F&& f) {
    encoder_.for_each_param([&](Param<S>& p) { f(Group::encoder, p); });
    decoder_.for_each_param([&](Param<S>& p) { f(Group::decoder, p); });
    attention_.for_each_param([&](Param<S>& p) { f(Group::attention, p); });
    teacher_cls_.for_each_param([&](Param<S>& p) { f(Group::teacher_classifier, p); });
    student_cls_.for_each_param([&](Param<S>& p) { f(Group::student_classifier, p); });
    occ_cls_.for_each_param([&](Param<S>& p) { f(Group::occlusion_classifier, p); });
  }

  template <typename F>
  void for_each_buffer(F&& f) {
    encoder_.for_each_buffer(f);
    decoder_.for_each_buffer(f);
    attention_.for_each_buffer(f);
  }

  void zero_grad() {
    for_each_param([](Group, Param<S>& p) { p.zero_grad(); });
  }

  std::size_t num_parameters() {
    std::size_t n = 0;
    for_each_param([&](Group, Param<S>& p) { n += p.value.size(); });
    return n;
  }

  // Encoder forward with an input-shape check against the configured image size.
  Tensor<S> encode(const Tensor<S>& images, Mode mode, typename Encoder<S>::Cache& cache) {
    require(images.rank() == 4 && images.dim(1) == 3 && images.dim(2) == cfg_.image.height &&
                images.dim(3) == cfg_.image.width,
            "encode: expected (B,3," + std::to_string(cfg_.image.height) + "," + std::to_string(cfg_.image.width) +
                ") images, got " + images.shape_str());
    return encoder_.forward(images, mode, cache);
  }

  // When frozen the student attention is the constant 0.5 and the embedding is unused.
  bool attention_frozen() const { return attention_frozen_; }
  void set_attention_frozen(bool v) { attention_frozen_ = v; }

  Tensor<S> student_attention(const Tensor<S>& parts, Mode mode, typename AttentionEmbedding<S>::Cache& cache) {
    if (attention_frozen_) return Tensor<S>(parts.shape(), S(0.5));
    return attention_.forward(parts, mode, cache);
  }

  Tensor<S> decode(const Tensor<S>& fmap, Mode mode, typename Decoder<S>::Cache& cache) {
    require(fmap.rank() == 4 && fmap.dim(1) == cfg_.channels() && fmap.dim(2) == cfg_.feature_h() &&
                fmap.dim(3) == cfg_.feature_w(),
            "decode: feature map shape mismatch " + fmap.shape_str());
    return decoder_.forward(fmap, mode, cache);
  }

 private:
  ModelConfig cfg_;
  Encoder<S> encoder_;
  Decoder<S> decoder_;
  AttentionEmbedding<S> attention_;
  PartClassifiers<S> teacher_cls_;
  PartClassifiers<S> student_cls_;
  OcclusionClassifier<S> occ_cls_;
  bool attention_frozen_ = false;
};

// Inference-mode helpers (no caches retained by the caller).
template <typename S>
Tensor<S> encode(Model<S>& m, const Tensor<S>& images, Mode mode = Mode::inference) {
  typename Encoder<S>::Cache c;
  return m.encode(images, mode, c);
}

template <typename S>
Tensor<S> decode(Model<S>& m, const Tensor<S>& fmap, Mode mode = Mode::inference) {
  typename Decoder<S>::Cache c;
  return m.decode(fmap, mode, c);
}

template <typename S>
Tensor<S> attention_forward(Model<S>& m, const Tensor<S>& parts, Mode mode = Mode::inference) {
  typename AttentionEmbedding<S>::Cache c;
  return m.attention().forward(parts, mode, c);
}

}  // namespace hg::model
