#pragma once

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "hg/cli/run_config.hpp"
#include "hg/evalkit/dcd_analysis.hpp"
#include "hg/evalkit/figures.hpp"
#include "hg/synthdata/benchmark.hpp"
#include "hg/trainer/train.hpp"

namespace hg::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3, kIoError = 4 };

// Command-line overrides; unset fields keep the config value.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> occluded_train;
  std::optional<std::string> metric;
  std::optional<int> epochs_pretrain;
  std::optional<int> epochs_joint;
  std::optional<std::string> resume;
  std::optional<std::string> out;
  bool strict_deterministic = false;
  bool no_cam_exclusion = false;
  bool allow_self = false;
};

inline std::string format_value(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Config file (if any) with the overrides applied, paths resolved and validated.
inline RunConfigFile resolve_config(const Overrides& o) {
  RunConfigFile rc = o.config ? load_run_config(*o.config) : RunConfigFile{};
  if (o.seed) {
    rc.train.seed = *o.seed;
    rc.data.seed = *o.seed;
  }
  if (o.mode) rc.train.mode = train::parse_mode(*o.mode);
  if (o.occluded_train) rc.train.occluded_train = *o.occluded_train;
  if (o.metric) rc.eval.metric = eval::parse_metric(*o.metric);
  if (o.epochs_pretrain) rc.train.epochs_pretrain = *o.epochs_pretrain;
  if (o.epochs_joint) rc.train.epochs_joint = *o.epochs_joint;
  if (o.strict_deterministic) rc.train.strict_deterministic = true;
  if (o.no_cam_exclusion) rc.eval.camera_exclusion = false;
  if (o.allow_self) rc.eval.allow_self = true;
  rc.resolve_paths();
  rc.validate();
  return rc;
}

// -------- gen-data --------

inline int cmd_gen_data(const Overrides& o, std::ostream& out) {
  RunConfigFile rc = resolve_config(o);
  if (o.out) rc.data_root = *o.out;
  if (rc.train.mode == train::TrainMode::sup) rc.data.occluded_train = true;
  const auto bench = synth::build_benchmark(rc.data);
  synth::write_benchmark(rc.root(), bench);
  const auto count = [&](const char* name, const std::vector<synth::LabeledImage>& v) {
    if (v.empty()) return;
    std::map<int, int> per_id;
    for (const auto& im : v) ++per_id[im.identity];
    int lo = per_id.begin()->second, hi = lo;
    for (const auto& [id, n] : per_id) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    out << name << ": " << v.size() << " images, " << per_id.size() << " identities, " << lo;
    if (hi != lo) out << "-" << hi;
    out << " per identity\n";
  };
  out << "dataset written to " << rc.root().string() << "\n";
  count("train", bench.train);
  count("gallery", bench.gallery);
  count("query", bench.query);
  count(synth::kQueryOccluded, bench.query_occluded);
  count(synth::kTrainOccluded, bench.train_occluded);
  return kOk;
}

// -------- pretrain / train --------

namespace detail {

inline std::filesystem::path run_dir_for(const RunConfigFile& rc, const Overrides& o) {
  if (o.out) return *o.out;
  return train::runs_root() / rc.run_name;
}

inline void print_progress(std::ostream& out, const json& h) {
  out << h.value("phase", std::string()) << " epoch " << h.value("epoch", 0);
  if (h.contains("mean")) out << " total=" << format_value(h["mean"].value("total", 0.0));
  if (h.contains("eval"))
    out << " r1=" << format_value(h["eval"].value("r1", 0.0)) << " map=" << format_value(h["eval"].value("map", 0.0))
        << " overlap=" << format_value(h["eval"].value("overlap_attended", 0.0));
  out << std::endl;
}

template <typename S>
int run_training(train::Checkpoint<S> ck, const train::TrainData& data, const std::filesystem::path& dir,
                 const json& config_doc, bool joint, bool fresh, std::ostream& out) {
  train::RunDirectory run(dir);
  if (fresh) run.write_config(config_doc);
  auto hooks = run.hooks<S>();
  const auto log_epoch = hooks.on_epoch;
  hooks.on_epoch = [&](const json& h) {
    log_epoch(h);
    print_progress(out, h);
  };
  std::filesystem::path last;
  hooks.on_checkpoint = [&](train::Checkpoint<S>& c) { last = run.save(c); };
  const bool pretrained = train::run_pretrain(ck, data, hooks);
  if (pretrained || fresh) hooks.on_checkpoint(ck);
  if (joint) train::run_joint(ck, data, hooks);
  out << "run directory: " << dir.string() << "\n";
  if (!last.empty()) out << "last checkpoint: " << last.string() << "\n";
  return kOk;
}

template <typename S>
int train_fresh(const RunConfigFile& rc, const Overrides& o, bool joint, std::ostream& out) {
  const auto data = train::load_train_data(rc.train);
  auto ck = train::initial_checkpoint<S>(rc.train, data);
  RunConfigFile doc = rc;
  doc.train = ck.config;
  return run_training<S>(std::move(ck), data, run_dir_for(rc, o), run_config_to_json(doc), joint, true, out);
}

template <typename S>
int train_resumed(const Overrides& o, bool joint, std::ostream& out) {
  const std::filesystem::path path = *o.resume;
  auto ck = train::load_checkpoint<S>(path);
  if (o.epochs_pretrain) ck.config.epochs_pretrain = *o.epochs_pretrain;
  if (o.epochs_joint) ck.config.epochs_joint = *o.epochs_joint;
  ck.config.validate();
  require(ck.pretrain_epochs_done <= ck.config.epochs_pretrain,
          "checkpoint already has more pretraining epochs than requested");
  const auto data = train::load_train_data(ck.config);
  const auto dir = o.out ? std::filesystem::path(*o.out) : path.parent_path();
  return run_training<S>(std::move(ck), data, dir.empty() ? "." : dir, json(), joint, false, out);
}

inline std::string checkpoint_precision(const std::filesystem::path& p) {
  return train::read_checkpoint_header(p).value("precision", std::string("float"));
}

}  // namespace detail

inline int cmd_train(const Overrides& o, bool joint, std::ostream& out) {
  if (o.resume) {
    return detail::checkpoint_precision(*o.resume) == "double" ? detail::train_resumed<double>(o, joint, out)
                                                               : detail::train_resumed<float>(o, joint, out);
  }
  const RunConfigFile rc = resolve_config(o);
  return rc.train.precision == "double" ? detail::train_fresh<double>(rc, o, joint, out)
                                        : detail::train_fresh<float>(rc, o, joint, out);
}

// -------- eval --------

struct EvalArgs {
  std::string checkpoint;
  std::string query;
  std::string gallery;
};

namespace detail {

template <typename S>
int eval_checkpoint(const EvalArgs& a, const Overrides& o, std::ostream& out) {
  auto ck = train::load_checkpoint<S>(a.checkpoint);
  eval::Metric metric = ck.config.metric;
  if (o.metric) metric = eval::parse_metric(*o.metric);
  eval::EvalOptions opt;
  opt.camera_exclusion = ck.config.camera_exclusion && !o.no_cam_exclusion;
  const std::string qdir = a.query.empty() ? ck.config.eval_query : a.query;
  const std::string gdir = a.gallery.empty() ? ck.config.eval_gallery : a.gallery;
  require(!qdir.empty() && !gdir.empty(), "eval needs --query and --gallery directories");
  std::error_code ec;
  opt.exclude_same_index = !o.allow_self && std::filesystem::equivalent(qdir, gdir, ec);
  const auto query = synth::read_image_dir(qdir);
  const auto gallery = synth::read_image_dir(gdir);
  require(!query.empty() && !gallery.empty(), "eval: query and gallery must contain images");
  const int bins = ck.config.num_bins;

  const auto s = eval::evaluate(ck.model, query, gallery, metric, opt, bins);
  const auto dcd = eval::analyze_dcd(ck.model, gallery, query, ck.config.kernel, bins);
  const auto fq = eval::extract_features(ck.model, query);

  const std::filesystem::path dir =
      o.out ? std::filesystem::path(*o.out) : std::filesystem::path(a.checkpoint).parent_path();
  std::filesystem::create_directories(dir.empty() ? "." : dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  json report = eval::report_to_json(s.report);
  report["overlap_raw"] = s.overlap_raw;
  report["overlap_attended"] = s.overlap_attended;
  report["dcd"] = dcd.summary();
  report["checkpoint"] = a.checkpoint;
  report["epoch"] = ck.epoch();
  report["query"] = qdir;
  report["gallery"] = gdir;
  eval::write_json_file(dir / "report.json", report);
  eval::export_cmc(dir, s.report);
  eval::export_dcd(dir, dcd.domains, bins);
  eval::export_attention(dir, query, fq.attention);
  out << "R1=" << format_value(s.report.rank(1)) << " R5=" << format_value(s.report.rank(5))
      << " R10=" << format_value(s.report.rank(10)) << " mAP=" << format_value(s.report.map) << "\n";
  if (s.report.skipped_queries > 0)
    std::cerr << "warning: " << s.report.skipped_queries << " queries had no valid gallery match and were skipped\n";
  return kOk;
}

template <typename S>
int analyze_checkpoint(const EvalArgs& a, const Overrides& o, std::ostream& out) {
  auto ck = train::load_checkpoint<S>(a.checkpoint);
  const std::string hdir = a.gallery.empty() ? ck.config.eval_gallery : a.gallery;
  const std::string odir = a.query.empty() ? ck.config.eval_query : a.query;
  require(!hdir.empty() && !odir.empty(), "analyze-dcd needs --holistic and --occluded directories");
  const auto holistic = synth::read_image_dir(hdir);
  const auto occluded = synth::read_image_dir(odir);
  const auto dcd = eval::analyze_dcd(ck.model, holistic, occluded, ck.config.kernel, ck.config.num_bins);
  const std::filesystem::path dir =
      o.out ? std::filesystem::path(*o.out) : std::filesystem::path(a.checkpoint).parent_path();
  std::error_code ec;
  std::filesystem::create_directories(dir.empty() ? "." : dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  json summary = dcd.summary();
  summary["checkpoint"] = a.checkpoint;
  summary["epoch"] = ck.epoch();
  eval::write_json_file(dir / "dcd_summary.json", summary);
  eval::export_dcd(dir, dcd.domains, ck.config.num_bins);
  out << dcd.summary().dump() << "\n";
  return kOk;
}

}  // namespace detail

inline int cmd_eval(const EvalArgs& a, const Overrides& o, std::ostream& out) {
  return detail::checkpoint_precision(a.checkpoint) == "double" ? detail::eval_checkpoint<double>(a, o, out)
                                                                : detail::eval_checkpoint<float>(a, o, out);
}

// a.gallery is the holistic directory, a.query the occluded one.
inline int cmd_analyze_dcd(const EvalArgs& a, const Overrides& o, std::ostream& out) {
  return detail::checkpoint_precision(a.checkpoint) == "double" ? detail::analyze_checkpoint<double>(a, o, out)
                                                                : detail::analyze_checkpoint<float>(a, o, out);
}

// Maps the exception hierarchy onto exit codes.
template <typename F>
int guarded(F&& f, std::ostream& err) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NotFound& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const ParseError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const LoadError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace hg::cli
