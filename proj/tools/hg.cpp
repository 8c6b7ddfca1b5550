// hg: data generation, training, evaluation and DCD analysis for the holistic-guidance pipeline.

#include <CLI11.hpp>

#include <iostream>

#include "hg/cli/commands.hpp"
#include "hg/runtime.hpp"

namespace {

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  return app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void common_flags(CLI::App* app, hg::cli::Overrides& o) {
  opt(app, "--config", o.config, "JSON run configuration");
  opt(app, "--seed", o.seed, "seed for data generation and training");
  opt(app, "--out", o.out, "output directory");
}

void training_flags(CLI::App* app, hg::cli::Overrides& o) {
  opt(app, "--mode", o.mode, "unsup or sup")->check(CLI::IsMember({"unsup", "sup"}));
  opt(app, "--occluded-train", o.occluded_train, "occluded training folder (sup mode)");
  opt(app, "--metric", o.metric, "euclidean or cosine")->check(CLI::IsMember({"euclidean", "cosine"}));
  opt(app, "--epochs-pretrain", o.epochs_pretrain, "teacher pretraining epochs");
  opt(app, "--epochs-joint", o.epochs_joint, "joint training epochs");
  app->add_flag("--strict-deterministic", o.strict_deterministic, "bitwise reproducible runs");
  app->add_flag("--no-cam-exclusion", o.no_cam_exclusion, "keep same-id same-camera gallery entries");
}

}  // namespace

int main(int argc, char** argv) {
  hg::tune_allocator();
  CLI::App app{"holistic-guidance occluded re-identification"};
  app.require_subcommand(1);
  hg::cli::Overrides o;
  hg::cli::EvalArgs ea;

  auto* gen = app.add_subcommand("gen-data", "render the synthetic benchmark");
  common_flags(gen, o);
  opt(gen, "--mode", o.mode, "sup also emits an occluded training folder")->check(CLI::IsMember({"unsup", "sup"}));

  auto* pre = app.add_subcommand("pretrain", "teacher pretraining only");
  common_flags(pre, o);
  training_flags(pre, o);
  opt(pre, "--resume", o.resume, "checkpoint to continue from");

  auto* tr = app.add_subcommand("train", "teacher pretraining followed by joint training");
  common_flags(tr, o);
  training_flags(tr, o);
  opt(tr, "--resume", o.resume, "checkpoint to continue from");

  auto* ev = app.add_subcommand("eval", "retrieval evaluation of a checkpoint");
  ev->add_option("checkpoint", ea.checkpoint, "checkpoint file")->required();
  ev->add_option("--query", ea.query, "query directory");
  ev->add_option("--gallery", ea.gallery, "gallery directory");
  opt(ev, "--metric", o.metric, "euclidean or cosine")->check(CLI::IsMember({"euclidean", "cosine"}));
  opt(ev, "--out", o.out, "output directory (default: the checkpoint's directory)");
  ev->add_flag("--no-cam-exclusion", o.no_cam_exclusion, "keep same-id same-camera gallery entries");
  ev->add_flag("--allow-self", o.allow_self, "keep the query itself when query and gallery are the same folder");

  auto* an = app.add_subcommand("analyze-dcd", "distance distributions of both domains");
  an->add_option("checkpoint", ea.checkpoint, "checkpoint file")->required();
  an->add_option("--holistic", ea.gallery, "holistic image directory");
  an->add_option("--occluded", ea.query, "occluded image directory");
  opt(an, "--out", o.out, "output directory (default: the checkpoint's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hg::cli::kConfigError;
  }

  return hg::cli::guarded(
      [&] {
        if (*gen) return hg::cli::cmd_gen_data(o, std::cout);
        if (*pre) return hg::cli::cmd_train(o, false, std::cout);
        if (*tr) return hg::cli::cmd_train(o, true, std::cout);
        if (*ev) return hg::cli::cmd_eval(ea, o, std::cout);
        return hg::cli::cmd_analyze_dcd(ea, o, std::cout);
      },
      std::cerr);
}
