#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hg/error.hpp"
#include "hg/synthdata/benchmark.hpp"
#include "hg/trainer/config.hpp"

namespace hg::cli {

using json = nlohmann::json;

struct EvalSection {
  std::string query;    // default <data.root>/query_occluded
  std::string gallery;  // default <data.root>/gallery
  eval::Metric metric = eval::Metric::euclidean;
  bool camera_exclusion = true;
  bool allow_self = false;
  int num_bins = 50;
};

// One JSON document: {"data": ..., "train": ..., "eval": ..., "run": ...}. Every field is optional.
struct RunConfigFile {
  std::string data_root = "data";
  synth::BenchmarkConfig data;
  train::TrainConfig train;
  EvalSection eval;
  std::string run_name;  // default hg_<mode>_s<seed>

  std::filesystem::path root() const { return data_root; }

  // Fills dataset paths left empty from data.root.
  void resolve_paths() {
    const auto r = root();
    if (train.holistic_train.empty()) train.holistic_train = (r / "train").string();
    if (train.mode == train::TrainMode::sup && train.occluded_train.empty())
      train.occluded_train = (r / synth::kTrainOccluded).string();
    if (eval.query.empty()) eval.query = (r / synth::kQueryOccluded).string();
    if (eval.gallery.empty()) eval.gallery = (r / "gallery").string();
    if (train.eval_query.empty()) train.eval_query = eval.query;
    if (train.eval_gallery.empty()) train.eval_gallery = eval.gallery;
    train.metric = eval.metric;
    train.camera_exclusion = eval.camera_exclusion;
    train.num_bins = eval.num_bins;
    if (run_name.empty())
      run_name = std::string("hg_") + train::mode_name(train.mode) + "_s" + std::to_string(train.seed);
  }

  void validate() const {
    data.validate();
    train.validate();
    require(eval.num_bins >= 1, "eval.num_bins must be >= 1");
    require(train.P <= data.num_identities, "train.P=" + std::to_string(train.P) + " exceeds data.num_identities=" +
                                                std::to_string(data.num_identities));
    require(train.model.image.height == data.image.height && train.model.image.width == data.image.width,
            "model image size does not match data image size");
    require(!run_name.empty() && run_name.find('/') == std::string::npos, "run.name must be a plain directory name");
  }
};

namespace detail {

inline void data_from_json(const json& j, RunConfigFile& rc) {
  train::detail::reject_unknown(j,
                                {"root", "num_identities", "train_per_id", "gallery_per_id", "query_per_id",
                                 "num_cameras", "image_height", "image_width", "seed", "occlusion", "occluded_query",
                                 "occluded_train"},
                                "data");
  auto& d = rc.data;
  train::detail::read(j, "root", rc.data_root, "data");
  train::detail::read(j, "num_identities", d.num_identities, "data");
  train::detail::read(j, "train_per_id", d.train_per_id, "data");
  train::detail::read(j, "gallery_per_id", d.gallery_per_id, "data");
  train::detail::read(j, "query_per_id", d.query_per_id, "data");
  train::detail::read(j, "num_cameras", d.num_cameras, "data");
  train::detail::read(j, "image_height", d.image.height, "data");
  train::detail::read(j, "image_width", d.image.width, "data");
  train::detail::read(j, "seed", d.seed, "data");
  if (j.contains("occlusion")) train::erasing_from_json(j.at("occlusion"), d.occlusion, "data.occlusion");
  train::detail::read(j, "occluded_query", d.occluded_query, "data");
  train::detail::read(j, "occluded_train", d.occluded_train, "data");
}

inline void eval_from_json(const json& j, EvalSection& e) {
  train::detail::reject_unknown(j, {"query", "gallery", "metric", "camera_exclusion", "allow_self", "num_bins"},
                                "eval");
  train::detail::read(j, "query", e.query, "eval");
  train::detail::read(j, "gallery", e.gallery, "eval");
  std::string metric = eval::metric_name(e.metric);
  train::detail::read(j, "metric", metric, "eval");
  e.metric = eval::parse_metric(metric);
  train::detail::read(j, "camera_exclusion", e.camera_exclusion, "eval");
  train::detail::read(j, "allow_self", e.allow_self, "eval");
  train::detail::read(j, "num_bins", e.num_bins, "eval");
}

}  // namespace detail

inline RunConfigFile run_config_from_json(const json& j) {
  RunConfigFile rc;
  train::detail::reject_unknown(j, {"data", "train", "eval", "run"}, "config");
  if (j.contains("data")) detail::data_from_json(j.at("data"), rc);
  // The occlusion and image size of the generated data default into training.
  rc.train.occlusion = rc.data.occlusion;
  rc.train.model.image = rc.data.image;
  if (j.contains("train")) {
    json t = j.at("train");
    if (!t.contains("occlusion")) t["occlusion"] = train::erasing_to_json(rc.data.occlusion);
    if (!t.contains("model") || !t["model"].contains("image_height")) t["model"]["image_height"] = rc.data.image.height;
    if (!t["model"].contains("image_width")) t["model"]["image_width"] = rc.data.image.width;
    rc.train = train::train_config_from_json(t);
  }
  if (j.contains("eval")) detail::eval_from_json(j.at("eval"), rc.eval);
  if (j.contains("run")) {
    train::detail::reject_unknown(j.at("run"), {"name"}, "run");
    train::detail::read(j.at("run"), "name", rc.run_name, "run");
  }
  return rc;
}

inline RunConfigFile load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

inline json data_to_json(const RunConfigFile& rc) {
  const auto& d = rc.data;
  return {{"root", rc.data_root},
          {"num_identities", d.num_identities},
          {"train_per_id", d.train_per_id},
          {"gallery_per_id", d.gallery_per_id},
          {"query_per_id", d.query_per_id},
          {"num_cameras", d.num_cameras},
          {"image_height", d.image.height},
          {"image_width", d.image.width},
          {"seed", d.seed},
          {"occlusion", train::erasing_to_json(d.occlusion)},
          {"occluded_query", d.occluded_query},
          {"occluded_train", d.occluded_train}};
}

inline json run_config_to_json(const RunConfigFile& rc) {
  return {{"data", data_to_json(rc)},
          {"train", train::train_config_to_json(rc.train)},
          {"eval",
           {{"query", rc.eval.query},
            {"gallery", rc.eval.gallery},
            {"metric", eval::metric_name(rc.eval.metric)},
            {"camera_exclusion", rc.eval.camera_exclusion},
            {"allow_self", rc.eval.allow_self},
            {"num_bins", rc.eval.num_bins}}},
          {"run", {{"name", rc.run_name}}}};
}

}  // namespace hg::cli
