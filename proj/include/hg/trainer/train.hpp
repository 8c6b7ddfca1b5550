#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/evalkit/signature.hpp"
#include "hg/rng.hpp"
#include "hg/synthdata/dataset_io.hpp"
#include "hg/synthdata/erasing.hpp"
#include "hg/trainer/checkpoint.hpp"
#include "hg/trainer/config.hpp"
#include "hg/trainer/sampler.hpp"
#include "hg/trainer/step.hpp"

namespace hg::train {

struct TrainData {
  LabeledSet holistic;
  std::optional<LabeledSet> occluded;  // sup mode only
  std::vector<synth::LabeledImage> eval_query;
  std::vector<synth::LabeledImage> eval_gallery;

  bool has_eval() const { return !eval_query.empty() && !eval_gallery.empty(); }
  const LabeledSet& student_set() const { return occluded ? *occluded : holistic; }
};

// Reads the folders named in the config.
inline TrainData load_train_data(const TrainConfig& cfg) {
  TrainData d;
  auto holistic = synth::read_image_dir(cfg.holistic_train);
  if (holistic.empty()) throw InvalidArgument("holistic training set is empty: " + cfg.holistic_train);
  d.holistic = LabeledSet::from_images(std::move(holistic));
  if (cfg.mode == TrainMode::sup) {
    auto occ = synth::read_image_dir(cfg.occluded_train);
    if (occ.empty()) throw InvalidArgument("occluded training set is empty: " + cfg.occluded_train);
    d.occluded = LabeledSet::from_images(std::move(occ));
  }
  if (!cfg.eval_query.empty() && !cfg.eval_gallery.empty()) {
    d.eval_query = synth::read_image_dir(cfg.eval_query);
    d.eval_gallery = synth::read_image_dir(cfg.eval_gallery);
  }
  return d;
}

template <typename S>
struct TrainHooks {
  std::function<void(const json&)> on_step;                  // one log line per optimisation step
  std::function<void(const json&)> on_epoch;                 // history entry just appended
  std::function<void(Checkpoint<S>&)> on_checkpoint;         // after pretraining and every joint epoch
};

namespace detail {
enum : std::uint64_t { kPretrain = 1, kJoint = 2, kTeacherNoise = 3, kStudentErase = 4, kInit = 5 };
}  // namespace detail

// Fresh checkpoint: class counts taken from the data, parameters initialised from train.seed.
template <typename S>
Checkpoint<S> initial_checkpoint(TrainConfig cfg, const TrainData& data) {
  require(data.holistic.num_classes() > 0, "holistic training set is empty");
  cfg.model.teacher_classes = data.holistic.num_classes();
  cfg.model.student_classes = data.student_set().num_classes();
  cfg.model.init_seed = derive_seed({cfg.seed, detail::kInit});
  cfg.validate();
  require(data.holistic.num_classes() >= cfg.P, "train.P=" + std::to_string(cfg.P) + " exceeds the " +
                                                    std::to_string(data.holistic.num_classes()) +
                                                    " identities of the holistic training set");
  require(data.student_set().num_classes() >= cfg.P, "train.P exceeds the identities of the occluded training set");
  Checkpoint<S> ck;
  ck.config = cfg;
  ck.model = model::Model<S>(cfg.model);
  ck.model.set_attention_frozen(cfg.freeze_attention);
  ck.optimizer = Adam<S>(cfg.lr);
  return ck;
}

inline int steps_per_epoch(const TrainConfig& cfg, const TrainData& data) {
  const auto n = static_cast<int>(data.holistic.images.size());
  return std::max(1, n / (cfg.P * cfg.K));
}

namespace detail {

template <typename S>
BranchBatch<S> teacher_batch(const LabeledSet& set, const PkBatch& pk, const synth::ErasingParams& noise,
                             std::uint64_t seed) {
  std::vector<synth::LabeledImage> noisy;
  std::vector<const synth::LabeledImage*> clean;
  BranchBatch<S> b;
  for (std::size_t k = 0; k < pk.indices.size(); ++k) {
    const auto& img = set.images[static_cast<std::size_t>(pk.indices[k])];
    clean.push_back(&img);
    auto n = synth::apply_random_erasing(img, noise, derive_seed({seed, k}));
    b.occluded.push_back(n.occluded_flag);
    noisy.push_back(std::move(n));
  }
  b.input = synth::to_batch<S>(noisy);
  b.target = synth::to_batch<S>(clean);
  b.labels = pk.labels;
  return b;
}

// Occluded-domain batch: erased on the fly (unsup) or taken as-is from the occluded folder (sup).
template <typename S>
BranchBatch<S> student_batch(const TrainConfig& cfg, const LabeledSet& set, const PkBatch& pk, std::uint64_t seed) {
  BranchBatch<S> b;
  b.labels = pk.labels;
  std::vector<const synth::LabeledImage*> src;
  for (int i : pk.indices) src.push_back(&set.images[static_cast<std::size_t>(i)]);
  if (cfg.mode == TrainMode::sup) {
    for (const auto* im : src) b.occluded.push_back(im->occluded_flag);
    b.input = synth::to_batch<S>(src);
    b.target = b.input;
    return b;
  }
  std::vector<synth::LabeledImage> erased;
  for (std::size_t k = 0; k < src.size(); ++k) {
    auto e = synth::apply_random_erasing(*src[k], cfg.occlusion, derive_seed({seed, k}));
    b.occluded.push_back(e.occluded_flag);
    erased.push_back(std::move(e));
  }
  b.input = synth::to_batch<S>(erased);
  b.target = synth::to_batch<S>(src);
  return b;
}

inline json step_line(const char* phase, int epoch, int step, long global_step, const objective::LossBreakdown& b) {
  json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["step"] = step;
  j["global_step"] = global_step;
  b.for_each_field([&](const char* n, const double& v) { j[n] = v; });
  return j;
}

struct Mean {
  std::vector<std::pair<std::string, double>> sums;
  int n = 0;
  void add(const objective::LossBreakdown& b) {
    std::size_t i = 0;
    b.for_each_field([&](const char* name, const double& v) {
      if (sums.size() <= i) sums.emplace_back(name, 0.0);
      sums[i++].second += v;
    });
    ++n;
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [name, v] : sums) j[name] = v / n;
    return j;
  }
};

}  // namespace detail

template <typename S>
json eval_snapshot(model::Model<S>& m, const TrainConfig& cfg, const TrainData& data) {
  eval::EvalOptions opt;
  opt.camera_exclusion = cfg.camera_exclusion;
  const auto s = eval::evaluate(m, data.eval_query, data.eval_gallery, cfg.metric, opt, cfg.num_bins);
  return {{"r1", s.report.rank(1)},
          {"r5", s.report.rank(5)},
          {"r10", s.report.rank(10)},
          {"map", s.report.map},
          {"overlap_attended", s.overlap_attended},
          {"overlap_raw", s.overlap_raw}};
}

// Runs the remaining teacher pretraining epochs (teacher CE + reconstruction only).
// Returns whether any epoch ran.
template <typename S>
bool run_pretrain(Checkpoint<S>& ck, const TrainData& data, const TrainHooks<S>& hooks = {}) {
  const TrainConfig& cfg = ck.config;
  const int nsteps = steps_per_epoch(cfg, data);
  if (ck.pretrain_epochs_done == 0 && ck.history.empty() && data.has_eval()) {
    json h{{"phase", "init"}, {"epoch", 0}, {"eval", eval_snapshot(ck.model, cfg, data)}};
    ck.history.push_back(h);
    if (hooks.on_epoch) hooks.on_epoch(h);
  }
  if (ck.pretrain_epochs_done >= cfg.epochs_pretrain) return false;
  while (ck.pretrain_epochs_done < cfg.epochs_pretrain) {
    const int e = ck.pretrain_epochs_done + 1;
    Rng rng(derive_seed({cfg.seed, detail::kPretrain, static_cast<std::uint64_t>(e)}));
    detail::Mean mean;
    for (int s = 0; s < nsteps; ++s) {
      const PkBatch pk = pk_sample_batch(data.holistic, cfg.P, cfg.K, rng);
      const auto tb = detail::teacher_batch<S>(
          data.holistic, pk, cfg.teacher_noise,
          derive_seed({cfg.seed, detail::kTeacherNoise, detail::kPretrain, static_cast<std::uint64_t>(e),
                       static_cast<std::uint64_t>(s)}));
      const auto b = pretrain_step(ck.model, ck.optimizer, tb, cfg.weights);
      mean.add(b);
      if (hooks.on_step)
        hooks.on_step(detail::step_line("pretrain", e, s, static_cast<long>(e - 1) * nsteps + s, b));
    }
    ck.pretrain_epochs_done = e;
    json h{{"phase", "pretrain"}, {"epoch", e}, {"mean", mean.to_json()}};
    if (data.has_eval() && (e % cfg.eval_every == 0 || e == cfg.epochs_pretrain))
      h["eval"] = eval_snapshot(ck.model, cfg, data);
    ck.history.push_back(h);
    if (hooks.on_epoch) hooks.on_epoch(h);
  }
  return true;
}

// Runs the remaining joint student-teacher epochs.
template <typename S>
void run_joint(Checkpoint<S>& ck, const TrainData& data, const TrainHooks<S>& hooks = {}) {
  const TrainConfig& cfg = ck.config;
  require(ck.pretrain_epochs_done >= cfg.epochs_pretrain, "joint training requires finished pretraining");
  const int nsteps = steps_per_epoch(cfg, data);
  const int base = cfg.epochs_pretrain;
  StepOptions so;
  so.use_global = cfg.l_global;
  so.use_occlusion_classifier = cfg.occlusion_classifier_active();
  if (ck.joint_epochs_done == 0 && cfg.epochs_joint > 0 && data.has_eval()) {
    json h{{"phase", "joint_start"}, {"epoch", base}, {"joint_epoch", 0}, {"eval", eval_snapshot(ck.model, cfg, data)}};
    ck.history.push_back(h);
    if (hooks.on_epoch) hooks.on_epoch(h);
  }
  const long global_base = static_cast<long>(cfg.epochs_pretrain) * nsteps;
  while (ck.joint_epochs_done < cfg.epochs_joint) {
    const int j = ck.joint_epochs_done + 1;
    const int e = base + j;
    Rng rng(derive_seed({cfg.seed, detail::kJoint, static_cast<std::uint64_t>(j)}));
    detail::Mean mean;
    for (int s = 0; s < nsteps; ++s) {
      const PkBatch tpk = pk_sample_batch(data.holistic, cfg.P, cfg.K, rng);
      const PkBatch spk = pk_sample_batch(data.student_set(), cfg.P, cfg.K, rng);
      const auto js = static_cast<std::uint64_t>(j), ss = static_cast<std::uint64_t>(s);
      const auto tb = detail::teacher_batch<S>(
          data.holistic, tpk, cfg.teacher_noise, derive_seed({cfg.seed, detail::kTeacherNoise, detail::kJoint, js, ss}));
      const auto sb = detail::student_batch<S>(cfg, data.student_set(), spk,
                                               derive_seed({cfg.seed, detail::kStudentErase, js, ss}));
      const auto b = train_step(ck.model, ck.optimizer, tb, sb, cfg.weights, cfg.kernel, so);
      mean.add(b);
      if (hooks.on_step)
        hooks.on_step(detail::step_line("joint", e, s, global_base + static_cast<long>(j - 1) * nsteps + s, b));
    }
    ck.joint_epochs_done = j;
    json h{{"phase", "joint"}, {"epoch", e}, {"joint_epoch", j}, {"mean", mean.to_json()}};
    if (data.has_eval() && (j % cfg.eval_every == 0 || j == cfg.epochs_joint))
      h["eval"] = eval_snapshot(ck.model, cfg, data);
    ck.history.push_back(h);
    if (hooks.on_epoch) hooks.on_epoch(h);
    if (hooks.on_checkpoint) hooks.on_checkpoint(ck);
  }
}

// -------- run directory --------

// runs/<name>/{config.json, log.jsonl, ckpt_<epoch>.bin, ckpt_<epoch>.manifest.json}
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
  }

  const std::filesystem::path& path() const { return dir_; }

  void write_config(const json& cfg) const { write_json(dir_ / "config.json", cfg); }

  void append_log(const json& line) {
    if (!log_.is_open()) {
      log_.open(dir_ / "log.jsonl", std::ios::app);
      if (!log_) throw IoError("cannot open " + (dir_ / "log.jsonl").string());
    }
    log_ << line.dump() << '\n';
    log_.flush();
    if (!log_) throw IoError("failed to append to " + (dir_ / "log.jsonl").string());
  }

  template <typename S>
  std::filesystem::path save(Checkpoint<S>& ck) const {
    const std::string stem = "ckpt_" + std::to_string(ck.epoch());
    const auto bin = dir_ / (stem + ".bin");
    save_checkpoint(bin, ck);
    try {
      write_json(dir_ / (stem + ".manifest.json"), checkpoint_manifest(ck));
    } catch (...) {
      std::error_code ec;
      std::filesystem::remove(bin, ec);
      throw;
    }
    return bin;
  }

  template <typename S>
  TrainHooks<S> hooks() {
    TrainHooks<S> h;
    h.on_step = [this](const json& l) { append_log(l); };
    h.on_epoch = [this](const json& e) { append_log(json{{"history", e}}); };
    h.on_checkpoint = [this](Checkpoint<S>& ck) { save(ck); };
    return h;
  }

  static void write_json(const std::filesystem::path& path, const json& j) {
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (out) out << j.dump(2) << '\n';
      out.flush();
      if (!out) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw IoError("failed to write " + path.string());
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("failed to write " + path.string() + ": " + ec.message());
  }

 private:
  std::filesystem::path dir_;
  std::ofstream log_;
};

// Root for run directories: $HG_RUNS_DIR if set, otherwise ./runs.
inline std::filesystem::path runs_root() {
  if (const char* env = std::getenv("HG_RUNS_DIR"); env && *env) return env;
  return "runs";
}

// -------- whole-run entry points --------

template <typename S>
Checkpoint<S> pretrain_teacher(const TrainConfig& cfg, const TrainData& data, const TrainHooks<S>& hooks = {}) {
  auto ck = initial_checkpoint<S>(cfg, data);
  run_pretrain(ck, data, hooks);
  if (hooks.on_checkpoint) hooks.on_checkpoint(ck);
  return ck;
}

template <typename S>
Checkpoint<S> train(const TrainConfig& cfg, const TrainData& data, const TrainHooks<S>& hooks = {}) {
  auto ck = pretrain_teacher<S>(cfg, data, hooks);
  run_joint(ck, data, hooks);
  return ck;
}

template <typename S>
Checkpoint<S> resume(Checkpoint<S> ck, const TrainData& data, const TrainHooks<S>& hooks = {}) {
  if (run_pretrain(ck, data, hooks) && hooks.on_checkpoint) hooks.on_checkpoint(ck);
  run_joint(ck, data, hooks);
  return ck;
}

}  // namespace hg::train
