#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>

#include "hg/dcdmmd/mmd.hpp"
#include "hg/error.hpp"
#include "hg/evalkit/retrieval.hpp"
#include "hg/model/model.hpp"
#include "hg/objective/losses.hpp"
#include "hg/synthdata/erasing.hpp"

namespace hg::train {

using json = nlohmann::json;

// unsup: the occluded domain is the holistic set erased on the fly.
// sup: the occluded domain is a separate folder of occluded images.
enum class TrainMode { unsup, sup };

inline const char* mode_name(TrainMode m) { return m == TrainMode::unsup ? "unsup" : "sup"; }
inline TrainMode parse_mode(const std::string& s) {
  if (s == "unsup") return TrainMode::unsup;
  if (s == "sup") return TrainMode::sup;
  throw InvalidArgument("mode: expected 'unsup' or 'sup', got '" + s + "'");
}

struct TrainConfig {
  std::string holistic_train;
  std::string occluded_train;
  TrainMode mode = TrainMode::unsup;
  int P = 8;
  int K = 4;
  int epochs_pretrain = 5;
  int epochs_joint = 30;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  objective::LossWeights weights;
  model::ModelConfig model;
  dcd::KernelConfig kernel;
  bool l_global = true;
  bool occlusion_classifier = true;  // only active in unsup mode
  bool freeze_attention = false;     // attention fixed at 0.5 (ablation)
  synth::ErasingParams occlusion{1.0, 0.1, 0.35, 0.3, 3.33, synth::FillMode::uniform_random};
  synth::ErasingParams teacher_noise{0.5, 0.02, 0.4, 0.3, 3.33, synth::FillMode::uniform_random};
  int eval_every = 5;
  std::string eval_query;
  std::string eval_gallery;
  eval::Metric metric = eval::Metric::euclidean;
  int num_bins = 50;
  bool camera_exclusion = true;
  bool strict_deterministic = true;
  std::string precision = "float";

  bool occlusion_classifier_active() const {
    return mode == TrainMode::unsup && occlusion_classifier && weights.occ_cls_weight != 0.0;
  }

  void validate() const {
    require(P >= 2, "train.P must be >= 2");
    require(K >= 2, "train.K must be >= 2");
    require(epochs_pretrain >= 0 && epochs_joint >= 0, "train epochs must be >= 0");
    require(lr > 0.0 && std::isfinite(lr), "train.lr must be > 0");
    require(eval_every >= 1, "train.eval_every must be >= 1");
    require(num_bins >= 1, "eval.num_bins must be >= 1");
    require(precision == "float" || precision == "double", "precision must be 'float' or 'double'");
    weights.validate();
    model.validate();
    kernel.validate();
    occlusion.validate();
    teacher_noise.validate();
    require(mode == TrainMode::unsup || !occluded_train.empty(), "sup mode requires an occluded training folder");
  }
};

// -------- JSON conversion (unknown keys are rejected) --------

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw InvalidArgument("unknown config key '" + where + "." + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config field '" + where + "." + key + "' has the wrong type");
  }
}

inline const char* fill_name(synth::FillMode f) {
  return f == synth::FillMode::uniform_random ? "uniform_random" : "mean_value";
}
inline synth::FillMode parse_fill(const std::string& s) {
  if (s == "uniform_random") return synth::FillMode::uniform_random;
  if (s == "mean_value") return synth::FillMode::mean_value;
  throw InvalidArgument("erasing.fill: expected uniform_random or mean_value");
}

}  // namespace detail

inline json erasing_to_json(const synth::ErasingParams& e) {
  return {{"probability", e.probability}, {"area_min", e.area_min},     {"area_max", e.area_max},
          {"aspect_min", e.aspect_min},   {"aspect_max", e.aspect_max}, {"fill", detail::fill_name(e.fill)}};
}

inline void erasing_from_json(const json& j, synth::ErasingParams& e, const std::string& where) {
  detail::reject_unknown(j, {"probability", "area_min", "area_max", "aspect_min", "aspect_max", "fill"}, where);
  detail::read(j, "probability", e.probability, where);
  detail::read(j, "area_min", e.area_min, where);
  detail::read(j, "area_max", e.area_max, where);
  detail::read(j, "aspect_min", e.aspect_min, where);
  detail::read(j, "aspect_max", e.aspect_max, where);
  std::string fill = detail::fill_name(e.fill);
  detail::read(j, "fill", fill, where);
  e.fill = detail::parse_fill(fill);
}

inline json weights_to_json(const objective::LossWeights& w) {
  return {{"lambda_recon", w.lambda_recon}, {"lambda1", w.lambda1}, {"lambda2", w.lambda2},
          {"lambda3", w.lambda3},           {"alpha", w.alpha},     {"occ_cls_weight", w.occ_cls_weight}};
}

inline void weights_from_json(const json& j, objective::LossWeights& w) {
  detail::reject_unknown(j, {"lambda_recon", "lambda1", "lambda2", "lambda3", "alpha", "occ_cls_weight"}, "weights");
  detail::read(j, "lambda_recon", w.lambda_recon, "weights");
  detail::read(j, "lambda1", w.lambda1, "weights");
  detail::read(j, "lambda2", w.lambda2, "weights");
  detail::read(j, "lambda3", w.lambda3, "weights");
  detail::read(j, "alpha", w.alpha, "weights");
  detail::read(j, "occ_cls_weight", w.occ_cls_weight, "weights");
}

inline json model_to_json(const model::ModelConfig& m) {
  return {{"image_height", m.image.height}, {"image_width", m.image.width},   {"widths", m.widths},
          {"strides", m.strides},           {"parts", m.parts},               {"reduction", m.reduction},
          {"teacher_classes", m.teacher_classes}, {"student_classes", m.student_classes},
          {"init_seed", m.init_seed}};
}

inline void model_from_json(const json& j, model::ModelConfig& m) {
  detail::reject_unknown(j, {"image_height", "image_width", "widths", "strides", "parts", "reduction",
                             "teacher_classes", "student_classes", "init_seed", "channels"},
                         "model");
  detail::read(j, "image_height", m.image.height, "model");
  detail::read(j, "image_width", m.image.width, "model");
  detail::read(j, "widths", m.widths, "model");
  detail::read(j, "strides", m.strides, "model");
  detail::read(j, "parts", m.parts, "model");
  detail::read(j, "reduction", m.reduction, "model");
  detail::read(j, "teacher_classes", m.teacher_classes, "model");
  detail::read(j, "student_classes", m.student_classes, "model");
  detail::read(j, "init_seed", m.init_seed, "model");
  if (j.contains("channels")) {
    int c = 0;
    detail::read(j, "channels", c, "model");
    if (!m.widths.empty()) m.widths.back() = c;
  }
}

inline json kernel_to_json(const dcd::KernelConfig& k) {
  return {{"bandwidths", k.bandwidths},
          {"mode", k.mode == dcd::BandwidthMode::fixed ? "fixed" : "median_scaled"}};
}

inline void kernel_from_json(const json& j, dcd::KernelConfig& k) {
  detail::reject_unknown(j, {"bandwidths", "mode"}, "kernel");
  detail::read(j, "bandwidths", k.bandwidths, "kernel");
  std::string mode = k.mode == dcd::BandwidthMode::fixed ? "fixed" : "median_scaled";
  detail::read(j, "mode", mode, "kernel");
  if (mode == "fixed")
    k.mode = dcd::BandwidthMode::fixed;
  else if (mode == "median_scaled")
    k.mode = dcd::BandwidthMode::median_scaled;
  else
    throw InvalidArgument("kernel.mode: expected fixed or median_scaled");
}

inline json train_config_to_json(const TrainConfig& c) {
  return {{"holistic_train", c.holistic_train},
          {"occluded_train", c.occluded_train},
          {"mode", mode_name(c.mode)},
          {"P", c.P},
          {"K", c.K},
          {"epochs_pretrain", c.epochs_pretrain},
          {"epochs_joint", c.epochs_joint},
          {"lr", c.lr},
          {"seed", c.seed},
          {"weights", weights_to_json(c.weights)},
          {"model", model_to_json(c.model)},
          {"kernel", kernel_to_json(c.kernel)},
          {"l_global", c.l_global},
          {"occlusion_classifier", c.occlusion_classifier},
          {"freeze_attention", c.freeze_attention},
          {"occlusion", erasing_to_json(c.occlusion)},
          {"teacher_noise", erasing_to_json(c.teacher_noise)},
          {"eval_every", c.eval_every},
          {"eval_query", c.eval_query},
          {"eval_gallery", c.eval_gallery},
          {"metric", eval::metric_name(c.metric)},
          {"num_bins", c.num_bins},
          {"camera_exclusion", c.camera_exclusion},
          {"strict_deterministic", c.strict_deterministic},
          {"precision", c.precision}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  detail::reject_unknown(j,
                         {"holistic_train", "occluded_train", "mode", "P", "K", "epochs_pretrain", "epochs_joint", "lr",
                          "seed", "weights", "model", "kernel", "l_global", "occlusion_classifier", "freeze_attention",
                          "occlusion", "teacher_noise", "eval_every", "eval_query", "eval_gallery", "metric",
                          "num_bins", "camera_exclusion", "strict_deterministic", "precision"},
                         "train");
  const std::string w = "train";
  detail::read(j, "holistic_train", c.holistic_train, w);
  detail::read(j, "occluded_train", c.occluded_train, w);
  std::string mode = mode_name(c.mode);
  detail::read(j, "mode", mode, w);
  c.mode = parse_mode(mode);
  detail::read(j, "P", c.P, w);
  detail::read(j, "K", c.K, w);
  detail::read(j, "epochs_pretrain", c.epochs_pretrain, w);
  detail::read(j, "epochs_joint", c.epochs_joint, w);
  detail::read(j, "lr", c.lr, w);
  detail::read(j, "seed", c.seed, w);
  if (j.contains("weights")) weights_from_json(j.at("weights"), c.weights);
  if (j.contains("model")) model_from_json(j.at("model"), c.model);
  if (j.contains("kernel")) kernel_from_json(j.at("kernel"), c.kernel);
  detail::read(j, "l_global", c.l_global, w);
  detail::read(j, "occlusion_classifier", c.occlusion_classifier, w);
  detail::read(j, "freeze_attention", c.freeze_attention, w);
  if (j.contains("occlusion")) erasing_from_json(j.at("occlusion"), c.occlusion, "train.occlusion");
  if (j.contains("teacher_noise")) erasing_from_json(j.at("teacher_noise"), c.teacher_noise, "train.teacher_noise");
  detail::read(j, "eval_every", c.eval_every, w);
  detail::read(j, "eval_query", c.eval_query, w);
  detail::read(j, "eval_gallery", c.eval_gallery, w);
  std::string metric = eval::metric_name(c.metric);
  detail::read(j, "metric", metric, w);
  c.metric = eval::parse_metric(metric);
  detail::read(j, "num_bins", c.num_bins, w);
  detail::read(j, "camera_exclusion", c.camera_exclusion, w);
  detail::read(j, "strict_deterministic", c.strict_deterministic, w);
  detail::read(j, "precision", c.precision, w);
  return c;
}

inline json breakdown_to_json(const objective::LossBreakdown& b) {
  json j = json::object();
  b.for_each_field([&](const char* n, const double& v) { j[n] = v; });
  return j;
}

}  // namespace hg::train
