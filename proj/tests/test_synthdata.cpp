#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "hg/synthdata/benchmark.hpp"
#include "test_util.hpp"

using namespace hg;
using namespace hg::synth;

namespace {

int altered_pixels(const LabeledImage& a, const LabeledImage& b) {
  int n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      bool diff = false;
      for (int c = 0; c < 3; ++c) diff = diff || a.px(y, x, c) != b.px(y, x, c);
      n += diff;
    }
  return n;
}

std::array<double, 3> channel_means(const LabeledImage& im) {
  std::array<double, 3> m{};
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) m[c] += im.px(y, x, c);
  for (auto& v : m) v /= im.height * im.width;
  return m;
}

}  // namespace

TEST(Atlas, MinimalAtlasHasDistinctIdentities) {
  const auto a = generate_atlas(2, 0);
  ASSERT_EQ(a.identities.size(), 2u);
  EXPECT_NE(a.identities[0], a.identities[1]);
}

TEST(Atlas, SameSeedIsBitwiseIdentical) { EXPECT_EQ(generate_atlas(50, 7), generate_atlas(50, 7)); }

TEST(Atlas, DifferentSeedsDiffer) {
  const auto a = generate_atlas(50, 7), b = generate_atlas(50, 8);
  bool differ = false;
  for (std::size_t i = 0; i < a.identities.size(); ++i) differ = differ || a.identities[i] != b.identities[i];
  EXPECT_TRUE(differ);
}

TEST(Atlas, ParametersPairwiseDistinctAndInRange) {
  const auto a = generate_atlas(50, 3);
  for (std::size_t i = 0; i < a.identities.size(); ++i) {
    const auto& p = a.identities[i];
    for (double c : p.base_color) EXPECT_TRUE(c >= 0.0 && c <= 1.0);
    EXPECT_GE(p.height_scale, 0.7);
    EXPECT_LE(p.height_scale, 1.3);
    EXPECT_GE(p.width_scale, 0.7);
    EXPECT_LE(p.width_scale, 1.3);
    for (std::size_t j = i + 1; j < a.identities.size(); ++j) EXPECT_NE(p, a.identities[j]);
  }
}

TEST(Atlas, RejectsFewerThanTwoIdentities) { EXPECT_THROW(generate_atlas(1, 0), InvalidArgument); }

TEST(Render, Deterministic) {
  const auto a = generate_atlas(5, 1);
  const auto x = render_sample(a, 2, 1, 99), y = render_sample(a, 2, 1, 99);
  EXPECT_EQ(x.pixels, y.pixels);
  EXPECT_EQ(x.domain, Domain::holistic);
  EXPECT_FALSE(x.occluded_flag);
}

TEST(Render, JitterChangesPixelsNotLabels) {
  const auto a = generate_atlas(5, 1);
  const auto x = render_sample(a, 2, 1, 1), y = render_sample(a, 2, 1, 2);
  EXPECT_NE(x.pixels, y.pixels);
  EXPECT_EQ(x.identity, y.identity);
  EXPECT_EQ(x.camera, y.camera);
}

TEST(Render, IdentitiesDifferInMeanColor) {
  const auto a = generate_atlas(10, 4);
  for (int i = 0; i + 1 < 10; ++i) {
    const auto m0 = channel_means(render_sample(a, i, 0, 5)), m1 = channel_means(render_sample(a, i + 1, 0, 5));
    double gap = 0.0;
    for (int c = 0; c < 3; ++c) gap = std::max(gap, std::abs(m0[c] - m1[c]));
    EXPECT_GT(gap, 0.01) << "identities " << i << " and " << i + 1;
  }
}

TEST(Render, PixelsInUnitRangeAndSized) {
  const auto a = generate_atlas(3, 0);
  const auto im = render_sample(a, 0, 2, 3, {64, 32});
  EXPECT_EQ(im.height, 64);
  EXPECT_EQ(im.width, 32);
  for (double v : im.pixels) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Render, IdentityOutOfRange) {
  const auto a = generate_atlas(3, 0);
  EXPECT_THROW(render_sample(a, 3, 0, 0), InvalidArgument);
  EXPECT_THROW(render_sample(a, -1, 0, 0), InvalidArgument);
}

TEST(Erasing, ZeroProbabilityIsNoOp) {
  const auto im = render_sample(generate_atlas(2, 0), 0, 0, 0);
  ErasingParams p;
  p.probability = 0.0;
  const auto out = apply_random_erasing(im, p, 11);
  EXPECT_EQ(out.pixels, im.pixels);
  EXPECT_FALSE(out.occluded_flag);
  EXPECT_EQ(out.domain, Domain::occluded);
}

TEST(Erasing, QuarterAreaSquare) {
  const auto im = render_sample(generate_atlas(2, 0), 1, 0, 0, {64, 32});
  ErasingParams p{1.0, 0.25, 0.25, 1.0, 1.0, FillMode::uniform_random};
  const int side = static_cast<int>(std::ceil(std::sqrt(0.25 * 64 * 32)));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EraseRect r;
    const auto out = apply_random_erasing(im, p, seed, &r);
    EXPECT_TRUE(out.occluded_flag);
    EXPECT_EQ(r.height, side);
    EXPECT_EQ(r.width, side);
    EXPECT_EQ(altered_pixels(im, out), side * side);
  }
}

TEST(Erasing, SameSeedSameOutput) {
  const auto im = render_sample(generate_atlas(2, 0), 1, 0, 0);
  ErasingParams p;
  EXPECT_EQ(apply_random_erasing(im, p, 3).pixels, apply_random_erasing(im, p, 3).pixels);
}

TEST(Erasing, AlteredFractionBoundedByMaxArea) {
  const auto im = render_sample(generate_atlas(2, 0), 0, 1, 0);
  ErasingParams p;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    EraseRect r;
    const auto out = apply_random_erasing(im, p, seed, &r);
    const int n = altered_pixels(im, out);
    EXPECT_LE(n, r.height * r.width);
    // Sides are rounded up, so allow one extra row and column over the sampled area.
    EXPECT_LE(n, (std::sqrt(p.area_max * p.aspect_max * 2048) + 1) * (std::sqrt(p.area_max / p.aspect_min * 2048) + 1));
    EXPECT_GE(r.top, 0);
    EXPECT_LE(r.top + r.height, im.height);
    EXPECT_LE(r.left + r.width, im.width);
  }
}

TEST(Erasing, MeanFillUsesImageMean) {
  const auto im = render_sample(generate_atlas(2, 0), 0, 0, 0);
  ErasingParams p{1.0, 0.2, 0.2, 1.0, 1.0, FillMode::mean_value};
  EraseRect r;
  const auto out = apply_random_erasing(im, p, 1, &r);
  const auto m = channel_means(im);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.px(r.top, r.left, c), m[c]);
}

TEST(Erasing, InvalidParams) {
  ErasingParams p;
  p.area_min = 0.5;
  p.area_max = 0.2;
  EXPECT_THROW(p.validate(), InvalidArgument);
  ErasingParams q;
  q.probability = 1.5;
  EXPECT_THROW(q.validate(), InvalidArgument);
}

TEST(DatasetIo, ParsesFilename) {
  const auto l = parse_filename("0003_c2_o1_000017.png");
  ASSERT_TRUE(l.has_value());
  EXPECT_EQ(l->identity, 3);
  EXPECT_EQ(l->camera, 2);
  EXPECT_TRUE(l->occluded_flag);
  EXPECT_EQ(l->index, 17);
  EXPECT_EQ(format_filename(*l), "0003_c2_o1_000017.png");
  EXPECT_FALSE(parse_filename("badname.png").has_value());
  EXPECT_FALSE(parse_filename("003_c2_o1_000017.png").has_value());
}

TEST(DatasetIo, Roundtrip) {
  test::TempDir dir;
  const auto atlas = generate_atlas(5, 2);
  std::vector<LabeledImage> imgs;
  for (int i = 0; i < 10; ++i) {
    // Files are read back in name order: identity, camera, flag, index.
    auto im = render_sample(atlas, i / 2, 1, static_cast<std::uint64_t>(i));
    if (i % 2) im = apply_random_erasing(im, ErasingParams{}, static_cast<std::uint64_t>(i));
    imgs.push_back(im);
  }
  write_split(dir.path(), Split::query, imgs);
  const auto back = read_split(dir.path(), Split::query);
  ASSERT_EQ(back.size(), imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    EXPECT_EQ(back[i].identity, imgs[i].identity);
    EXPECT_EQ(back[i].camera, imgs[i].camera);
    EXPECT_EQ(back[i].occluded_flag, imgs[i].occluded_flag);
    double err = 0.0;
    for (std::size_t k = 0; k < imgs[i].pixels.size(); ++k)
      err = std::max(err, std::abs(back[i].pixels[k] - imgs[i].pixels[k]));
    EXPECT_LE(err, 1.0 / 255.0);
  }
}

TEST(DatasetIo, MalformedNameIsParseError) {
  test::TempDir dir;
  std::filesystem::create_directories(dir / "train");
  std::ofstream(dir / "train" / "badname.png") << "x";
  try {
    read_split(dir.path(), Split::train);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("badname.png"), std::string::npos);
  }
}

TEST(DatasetIo, MissingDirectoryIsNotFound) {
  test::TempDir dir;
  EXPECT_THROW(read_split(dir.path(), Split::gallery), NotFound);
}

TEST(Benchmark, CountsAndFolders) {
  test::TempDir dir;
  BenchmarkConfig cfg;
  cfg.num_identities = 50;
  cfg.train_per_id = 20;
  cfg.occluded_train = true;
  const auto b = build_benchmark(cfg);
  EXPECT_EQ(b.train.size(), 1000u);
  EXPECT_EQ(b.gallery.size(), 250u);
  EXPECT_EQ(b.query.size(), 250u);
  EXPECT_EQ(b.query_occluded.size(), 250u);
  EXPECT_EQ(b.train_occluded.size(), 1000u);
  write_benchmark(dir.path(), b);
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "train")) {
    EXPECT_TRUE(parse_filename(e.path().filename().string()).has_value());
    ++n;
  }
  EXPECT_EQ(n, 1000);
  const auto occ = read_image_dir(dir / kQueryOccluded);
  ASSERT_EQ(occ.size(), 250u);
  for (const auto& im : occ) EXPECT_TRUE(im.occluded_flag);
}

TEST(Benchmark, InMemoryEqualsDisk) {
  test::TempDir dir;
  BenchmarkConfig cfg;
  cfg.num_identities = 3;
  cfg.train_per_id = 2;
  cfg.gallery_per_id = 1;
  cfg.query_per_id = 1;
  const auto b = build_benchmark(cfg);
  write_benchmark(dir.path(), b);
  const auto back = read_split(dir.path(), Split::train);
  ASSERT_EQ(back.size(), b.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i].pixels, b.train[i].pixels);
}

TEST(Benchmark, QueryCamerasDifferFromGalleryForSameIndex) {
  BenchmarkConfig cfg;
  cfg.num_identities = 2;
  cfg.train_per_id = 1;
  const auto b = build_benchmark(cfg);
  for (std::size_t i = 0; i < b.query.size(); ++i) EXPECT_NE(b.query[i].camera, b.gallery[i].camera);
}
