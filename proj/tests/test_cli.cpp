#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "hg/cli/commands.hpp"
#include "hg/synthdata/dataset_io.hpp"
#include "test_util.hpp"

using namespace hg;
using namespace hg::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Digest of every file under `root`, keyed by relative path.
std::map<std::string, std::uint64_t> tree_digest(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = train::detail::fnv1a(slurp(e.path()));
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with(prefix) && name.ends_with(suffix)) ++n;
  }
  return n;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

// A six-identity, 32x16 setup in double precision with one epoch per phase.
json small_config(const fs::path& data_root) {
  return {{"data",
           {{"root", data_root.string()},
            {"num_identities", 6},
            {"train_per_id", 4},
            {"gallery_per_id", 2},
            {"query_per_id", 2},
            {"image_height", 32},
            {"image_width", 16}}},
          {"train",
           {{"P", 3},
            {"K", 2},
            {"epochs_pretrain", 1},
            {"epochs_joint", 1},
            {"eval_every", 1},
            {"precision", "double"},
            {"model", {{"widths", {8, 16, 16}}, {"strides", {2, 2, 1}}, {"parts", 4}, {"reduction", 4}}}}}};
}

fs::path write_config(const test::TempDir& dir, const json& j, const std::string& name = "config.json") {
  const auto p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

struct Call {
  int rc = 0;
  std::string out, err;
};

template <typename F>
Call call(F&& f) {
  std::ostringstream out, err;
  Call c;
  c.rc = guarded([&] { return f(out); }, err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

Call gen_data(const Overrides& o) {
  return call([&](std::ostream& out) { return cmd_gen_data(o, out); });
}

Call train_cmd(const Overrides& o) {
  return call([&](std::ostream& out) { return cmd_train(o, true, out); });
}

Call eval_cmd(const EvalArgs& a, const Overrides& o) {
  return call([&](std::ostream& out) { return cmd_eval(a, o, out); });
}

// Parses "R1=<v> R5=<v> R10=<v> mAP=<v>".
std::map<std::string, double> parse_metrics(const std::string& line) {
  std::map<std::string, double> m;
  std::istringstream in(line);
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    m[tok.substr(0, eq)] = std::stod(tok.substr(eq + 1));
  }
  return m;
}

// A generated dataset plus a trained run, shared by the eval and analysis tests.
class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir();
    Overrides o;
    o.config = write_config(*dir_, small_config(*dir_ / "data")).string();
    ASSERT_EQ(gen_data(o).rc, 0);
    o.out = (*dir_ / "run").string();
    const auto c = train_cmd(o);
    ASSERT_EQ(c.rc, 0) << c.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static fs::path data() { return *dir_ / "data"; }
  static fs::path run() { return *dir_ / "run"; }
  static std::string checkpoint() { return (run() / "ckpt_2.bin").string(); }

  static test::TempDir* dir_;
};

test::TempDir* TrainedRun::dir_ = nullptr;

}  // namespace

TEST(GenData, WritesSplitsWithValidNames) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  const auto c = gen_data(o);
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_NE(c.out.find("train: 24 images, 6 identities, 4 per identity"), std::string::npos) << c.out;
  EXPECT_NE(c.out.find("query_occluded: 12 images"), std::string::npos) << c.out;
  EXPECT_FALSE(fs::exists(dir / "data" / synth::kTrainOccluded));
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "data" / "train")) {
    EXPECT_TRUE(synth::parse_filename(e.path().filename().string()).has_value()) << e.path();
    ++n;
  }
  EXPECT_EQ(n, 24u);
}

TEST(GenData, SameConfigSameBytes) {
  test::TempDir dir;
  Overrides a, b;
  a.config = write_config(dir, small_config(dir / "a"), "a.json").string();
  b.config = write_config(dir, small_config(dir / "b"), "b.json").string();
  ASSERT_EQ(gen_data(a).rc, 0);
  ASSERT_EQ(gen_data(b).rc, 0);
  const auto da = tree_digest(dir / "a");
  EXPECT_FALSE(da.empty());
  EXPECT_EQ(da, tree_digest(dir / "b"));
  Overrides c = a;
  c.seed = 99;
  c.out = (dir / "c").string();
  ASSERT_EQ(gen_data(c).rc, 0);
  EXPECT_NE(da, tree_digest(dir / "c"));
}

TEST(GenData, SupModeAddsOccludedTraining) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  o.mode = "sup";
  ASSERT_EQ(gen_data(o).rc, 0);
  EXPECT_EQ(count_files(dir / "data" / synth::kTrainOccluded, "", ".png"), 24u);
}

TEST(GenData, InvalidConfigFailsBeforeWriting) {
  test::TempDir dir;
  auto j = small_config(dir / "data");
  j["train"]["P"] = 7;
  Overrides o;
  o.config = write_config(dir, j).string();
  const auto c = gen_data(o);
  EXPECT_EQ(c.rc, kConfigError);
  EXPECT_NE(c.err.find("train.P"), std::string::npos) << c.err;
  EXPECT_FALSE(fs::exists(dir / "data"));
}

TEST(Config, ErrorsMapToExitCodes) {
  test::TempDir dir;
  Overrides o;
  o.config = (dir / "missing.json").string();
  EXPECT_EQ(gen_data(o).rc, kIoError);

  std::ofstream(dir / "broken.json") << "{ not json";
  o.config = (dir / "broken.json").string();
  EXPECT_EQ(gen_data(o).rc, kConfigError);

  auto j = small_config(dir / "data");
  j["train"]["bogus"] = 1;
  o.config = write_config(dir, j).string();
  const auto c = gen_data(o);
  EXPECT_EQ(c.rc, kConfigError);
  EXPECT_NE(c.err.find("bogus"), std::string::npos) << c.err;
}

TEST(Config, OverridesApply) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  o.seed = 12;
  o.metric = "cosine";
  o.epochs_joint = 4;
  o.no_cam_exclusion = true;
  o.strict_deterministic = true;
  const auto rc = resolve_config(o);
  EXPECT_EQ(rc.train.seed, 12u);
  EXPECT_EQ(rc.data.seed, 12u);
  EXPECT_EQ(rc.train.epochs_joint, 4);
  EXPECT_EQ(rc.train.metric, eval::Metric::cosine);
  EXPECT_FALSE(rc.train.camera_exclusion);
  EXPECT_EQ(fs::path(rc.train.holistic_train), dir / "data" / "train");
  EXPECT_EQ(rc.run_name, "hg_unsup_s12");
}

TEST(Train, ZeroJointEpochsKeepsOnlyPretrainCheckpoint) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  ASSERT_EQ(gen_data(o).rc, 0);
  o.epochs_joint = 0;
  o.out = (dir / "run").string();
  const auto c = train_cmd(o);
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_EQ(count_files(dir / "run", "ckpt_", ".bin"), 1u);
  EXPECT_TRUE(fs::exists(dir / "run" / "ckpt_1.bin"));
  EXPECT_TRUE(fs::exists(dir / "run" / "config.json"));
}

TEST(Train, RunsRootFromEnvironment) {
  test::TempDir dir;
  Overrides o;
  auto j = small_config(dir / "data");
  j["run"] = {{"name", "named"}};
  j["train"]["epochs_joint"] = 0;
  o.config = write_config(dir, j).string();
  ASSERT_EQ(gen_data(o).rc, 0);
  ::setenv("HG_RUNS_DIR", (dir / "runs").c_str(), 1);
  const auto c = train_cmd(o);
  ::unsetenv("HG_RUNS_DIR");
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_TRUE(fs::exists(dir / "runs" / "named" / "ckpt_1.bin"));
}

TEST(Train, SupModeNeedsItsFolder) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  ASSERT_EQ(gen_data(o).rc, 0);
  o.mode = "sup";
  o.out = (dir / "run").string();
  EXPECT_EQ(train_cmd(o).rc, kIoError);
  o.occluded_train = (dir / "data" / "query_occluded").string();
  const auto c = train_cmd(o);
  EXPECT_EQ(c.rc, 0) << c.err;
  EXPECT_EQ(read_json(dir / "run" / "config.json")["train"]["mode"], "sup");
}

TEST(Train, ResumeContinuesEpochNumbering) {
  test::TempDir dir;
  Overrides o;
  o.config = write_config(dir, small_config(dir / "data")).string();
  ASSERT_EQ(gen_data(o).rc, 0);
  o.out = (dir / "run").string();
  ASSERT_EQ(train_cmd(o).rc, 0);
  Overrides r;
  r.resume = (dir / "run" / "ckpt_2.bin").string();
  r.epochs_joint = 3;
  const auto c = train_cmd(r);
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "ckpt_4.bin"));
  std::vector<int> epochs;
  std::ifstream in(dir / "run" / "log.jsonl");
  for (std::string l; std::getline(in, l);) {
    const auto j = json::parse(l);
    if (j.contains("history") && j["history"]["phase"] == "joint") epochs.push_back(j["history"]["epoch"].get<int>());
  }
  EXPECT_EQ(epochs, (std::vector<int>{2, 3, 4}));
}

TEST(Train, MissingCheckpointIsIoError) {
  Overrides r;
  r.resume = "/nonexistent/ckpt_1.bin";
  EXPECT_EQ(train_cmd(r).rc, kIoError);
}

TEST_F(TrainedRun, EvalSelfMatchRanksFirst) {
  test::TempDir out;
  EvalArgs a{checkpoint(), (data() / "gallery").string(), (data() / "gallery").string()};
  Overrides o;
  o.no_cam_exclusion = true;
  o.allow_self = true;
  o.out = out.path().string();
  const auto c = eval_cmd(a, o);
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_EQ(parse_metrics(c.out).at("R1"), 1.0) << c.out;
}

TEST_F(TrainedRun, EvalExcludesSelfByDefaultForSameFolder) {
  test::TempDir out;
  EvalArgs a{checkpoint(), (data() / "gallery").string(), (data() / "gallery").string()};
  Overrides o;
  o.out = out.path().string();
  ASSERT_EQ(eval_cmd(a, o).rc, 0);
  EXPECT_EQ(read_json(out / "report.json")["exclusion_rule"], "same-id-same-camera+self");
}

TEST_F(TrainedRun, EvalStdoutMatchesReport) {
  test::TempDir out;
  EvalArgs a{checkpoint(), "", ""};
  Overrides o;
  o.out = out.path().string();
  const auto c = eval_cmd(a, o);
  ASSERT_EQ(c.rc, 0) << c.err;
  ASSERT_TRUE(c.out.starts_with("R1=")) << c.out;
  const auto m = parse_metrics(c.out);
  const auto r = read_json(out / "report.json");
  const auto cmc = r["cmc"].get<std::vector<double>>();
  EXPECT_EQ(m.at("R1"), cmc[0]);
  EXPECT_EQ(m.at("R5"), cmc[4]);
  EXPECT_EQ(m.at("R10"), cmc[9]);
  EXPECT_EQ(m.at("mAP"), r["map"].get<double>());
  EXPECT_EQ(r["metric"], "euclidean");
  EXPECT_EQ(line_count(out / "cmc.csv"), cmc.size() + 1);
  EXPECT_EQ(cmc.size(), 12u);
  for (const char* f : {"cmc.png", "dcd.csv", "dcd_hist.png", "attention.csv", "attention.png"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST_F(TrainedRun, EvalCosineMetadata) {
  test::TempDir out;
  EvalArgs a{checkpoint(), "", ""};
  Overrides o;
  o.metric = "cosine";
  o.out = out.path().string();
  ASSERT_EQ(eval_cmd(a, o).rc, 0);
  EXPECT_EQ(read_json(out / "report.json")["metric"], "cosine");
}

TEST_F(TrainedRun, EvalErrors) {
  EXPECT_EQ(eval_cmd({"/nonexistent.bin", "", ""}, {}).rc, kIoError);
  EXPECT_EQ(eval_cmd({checkpoint(), "/nonexistent", ""}, {}).rc, kIoError);
}

TEST_F(TrainedRun, AnalyzeDcdOutputs) {
  test::TempDir out;
  EvalArgs a{checkpoint(), (data() / "query_occluded").string(), (data() / "gallery").string()};
  Overrides o;
  o.out = out.path().string();
  const auto c = call([&](std::ostream& s) { return cmd_analyze_dcd(a, o, s); });
  ASSERT_EQ(c.rc, 0) << c.err;
  const auto j = read_json(out / "dcd_summary.json");
  for (const char* k : {"overlap_holistic", "overlap_occluded_raw", "overlap_occluded_attended", "mmd_wc", "mmd_bc"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(json::parse(c.out)["mmd_bc"], j["mmd_bc"]);
  // Four parts; 12 holistic images, 12 occluded images seen raw and attended.
  const std::size_t pairs = 12 * 11 / 2;
  EXPECT_EQ(line_count(out / "dcd.csv"), 4 * 3 * pairs + 1);
}

TEST(Binary, ParseErrorsExitWithConfigCode) {
  const std::string bin = HG_BINARY;
  const auto rc = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(rc("--help"), 0);
  EXPECT_EQ(rc(""), kConfigError);
  EXPECT_EQ(rc("train --mode bogus"), kConfigError);
  EXPECT_EQ(rc("eval"), kConfigError);
  EXPECT_EQ(rc("gen-data --config /nonexistent.json"), kIoError);
}
