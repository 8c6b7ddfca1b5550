#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "hg/evalkit/dcd_analysis.hpp"
#include "hg/evalkit/figures.hpp"
#include "hg/synthdata/benchmark.hpp"
#include "hg/synthdata/png.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "train_fixture.hpp"

using namespace hg;
using namespace hg::eval;

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<double> uniform(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = hg::uniform(rng, lo, hi);
  return v;
}

std::vector<std::vector<double>> nested(const DistanceMatrix& d) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(d.rows));
  for (int q = 0; q < d.rows; ++q)
    for (int g = 0; g < d.cols; ++g) out[q].push_back(d(q, g));
  return out;
}

struct Toy {
  synth::Benchmark bench;
  model::Model<double> model;
};

Toy toy() {
  return {synth::build_benchmark(test::small_benchmark(5, 3)), model::Model<double>(test::small_model())};
}

}  // namespace

TEST(DistanceMatrix, IdenticalSetsHaveZeroDiagonal) {
  Rng rng(1);
  const auto x = uniform(6 * 4, rng);
  for (Metric m : {Metric::euclidean, Metric::cosine}) {
    const auto d = distance_matrix(x, x, 4, m);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(d(i, i), 0.0, 1e-9);
  }
}

TEST(DistanceMatrix, OrthogonalPair) {
  const std::vector<double> q{1, 0}, g{0, 1};
  EXPECT_NEAR(distance_matrix(q, g, 2, Metric::euclidean)(0, 0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(distance_matrix(q, g, 2, Metric::cosine)(0, 0), 1.0, 1e-12);
}

TEST(DistanceMatrix, MatchesElementwiseOracle) {
  Rng rng(2);
  const int W = 6;
  const auto q = uniform(5 * W, rng), g = uniform(7 * W, rng);
  const auto de = distance_matrix(q, g, W, Metric::euclidean);
  const auto dc = distance_matrix(q, g, W, Metric::cosine);
  ASSERT_EQ(de.rows, 5);
  ASSERT_EQ(de.cols, 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) {
      double ss = 0, dot = 0, nq = 0, ng = 0;
      for (int k = 0; k < W; ++k) {
        const double a = q[i * W + k], b = g[j * W + k];
        ss += (a - b) * (a - b);
        dot += a * b;
        nq += a * a;
        ng += b * b;
      }
      EXPECT_NEAR(de(i, j), std::sqrt(ss), 1e-9);
      EXPECT_NEAR(dc(i, j), 1.0 - dot / std::sqrt(nq * ng), 1e-9);
    }
}

TEST(DistanceMatrix, TransposeSymmetry) {
  Rng rng(3);
  const auto a = uniform(4 * 3, rng), b = uniform(9 * 3, rng);
  for (Metric m : {Metric::euclidean, Metric::cosine}) {
    const auto ab = distance_matrix(a, b, 3, m), ba = distance_matrix(b, a, 3, m);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 9; ++j) EXPECT_NEAR(ab(i, j), ba(j, i), 1e-12);
  }
}

TEST(DistanceMatrix, ZeroVectorUnderCosineNamesIndex) {
  const std::vector<double> q{1, 1, 0, 0, 2, 1}, g{1, 0};
  EXPECT_NO_THROW(distance_matrix(q, g, 2, Metric::euclidean));
  try {
    distance_matrix(q, g, 2, Metric::cosine);
    FAIL() << "expected invalid argument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(distance_matrix({1, 2, 3}, g, 2, Metric::euclidean), InvalidArgument);
  EXPECT_THROW(parse_metric("manhattan"), InvalidArgument);
}

TEST(CmcMap, AveragePrecisionHandExample) {
  DistanceMatrix d{1, 5, {0.1, 0.2, 0.3, 0.4, 0.5}};
  const auto r = cmc_map(d, {7}, {0}, {7, 1, 7, 2, 3}, {1, 1, 1, 1, 1});
  EXPECT_NEAR(r.map, (1.0 + 2.0 / 3.0) / 2.0, 1e-9);
  EXPECT_NEAR(r.map, 0.8333, 1e-4);
  EXPECT_EQ(r.rank(1), 1.0);
}

TEST(CmcMap, PerfectRanking) {
  DistanceMatrix d{2, 4, {0.1, 0.2, 0.8, 0.9, 0.7, 0.6, 0.2, 0.1}};
  const auto r = cmc_map(d, {1, 2}, {0, 0}, {1, 1, 2, 2}, {1, 1, 1, 1});
  EXPECT_EQ(r.map, 1.0);
  EXPECT_EQ(r.rank(1), 1.0);
  EXPECT_EQ(r.rank_lists[1], (std::vector<int>{3, 2, 1, 0}));
}

TEST(CmcMap, TiesBrokenByGalleryIndex) {
  DistanceMatrix d{1, 3, {0.5, 0.5, 0.5}};
  const auto r = cmc_map(d, {4}, {0}, {1, 4, 4}, {1, 1, 1});
  EXPECT_EQ(r.rank_lists[0], (std::vector<int>{0, 1, 2}));
  EXPECT_NEAR(r.map, (0.5 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_EQ(r.rank(1), 0.0);
  EXPECT_EQ(r.rank(2), 1.0);
}

TEST(CmcMap, CameraExclusionAndSkippedQueries) {
  DistanceMatrix d{2, 3, {0.0, 0.4, 0.9, 0.1, 0.2, 0.3}};
  // Query 0's closest same-id entry is on its own camera and is dropped.
  const auto r = cmc_map(d, {1, 2}, {0, 1}, {1, 1, 2}, {0, 3, 1});
  ASSERT_EQ(r.valid_queries, (std::vector<int>{0}));
  EXPECT_EQ(r.skipped_queries, 1);
  EXPECT_EQ(r.rank_lists[0], (std::vector<int>{1, 2}));
  EXPECT_EQ(r.map, 1.0);
  const auto all = cmc_map(d, {1, 2}, {0, 1}, {1, 1, 2}, {0, 3, 1}, {.camera_exclusion = false});
  EXPECT_EQ(all.skipped_queries, 0);
  EXPECT_EQ(all.exclusion_rule, "none");
}

TEST(CmcMap, SelfExclusion) {
  DistanceMatrix d{3, 3, {0, 1, 2, 1, 0, 1, 2, 1, 0}};
  const auto r = cmc_map(d, {1, 1, 2}, {0, 0, 0}, {1, 1, 2}, {0, 0, 0},
                         {.camera_exclusion = false, .exclude_same_index = true});
  EXPECT_EQ(r.skipped_queries, 1);
  EXPECT_EQ(r.rank_lists[0], (std::vector<int>{1, 2}));
  EXPECT_EQ(r.exclusion_rule, "none+self");
  EXPECT_THROW(cmc_map(DistanceMatrix{1, 2, {0, 1}}, {1}, {0}, {1, 1}, {0, 1}, {.exclude_same_index = true}),
               InvalidArgument);
}

TEST(CmcMap, MatchesCountingOracleOnRandomInstances) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const int Q = 20, G = 1 + static_cast<int>(uniform_index(rng, 40));
    DistanceMatrix d{Q, G, {}};
    // Coarse values so ties are common.
    for (int k = 0; k < Q * G; ++k) d.values.push_back(static_cast<double>(uniform_index(rng, 8)));
    std::vector<int> qi, qc, gi, gc;
    for (int q = 0; q < Q; ++q) {
      qi.push_back(static_cast<int>(uniform_index(rng, 5)));
      qc.push_back(static_cast<int>(uniform_index(rng, 3)));
    }
    for (int g = 0; g < G; ++g) {
      gi.push_back(static_cast<int>(uniform_index(rng, 5)));
      gc.push_back(static_cast<int>(uniform_index(rng, 3)));
    }
    const auto r = cmc_map(d, qi, qc, gi, gc);
    const auto o = oracle::rank_by_counting(nested(d), qi, qc, gi, gc, true);
    EXPECT_EQ(static_cast<int>(r.valid_queries.size()), o.valid);
    EXPECT_EQ(r.skipped_queries, Q - o.valid);
    EXPECT_EQ(r.map, o.map);
    EXPECT_EQ(r.cmc, o.cmc);
  }
}

TEST(CmcMap, CurveProperties) {
  Rng rng(5);
  const int Q = 12, G = 30;
  DistanceMatrix d{Q, G, uniform(Q * G, rng, 0.0, 1.0)};
  std::vector<int> qi, qc, gi, gc;
  for (int q = 0; q < Q; ++q) {
    qi.push_back(q % 6);
    qc.push_back(0);
  }
  for (int g = 0; g < G; ++g) {
    gi.push_back(g % 6);
    gc.push_back(1);
  }
  const auto r = cmc_map(d, qi, qc, gi, gc);
  ASSERT_EQ(r.cmc.size(), static_cast<std::size_t>(G));
  for (std::size_t k = 1; k < r.cmc.size(); ++k) EXPECT_LE(r.cmc[k - 1], r.cmc[k]);
  EXPECT_EQ(r.cmc.back(), 1.0);
  EXPECT_GE(r.map, 0.0);
  EXPECT_LE(r.map, 1.0);
  for (std::size_t i = 0; i < r.rank_lists.size(); ++i) {
    const int q = r.valid_queries[i];
    for (std::size_t k = 1; k < r.rank_lists[i].size(); ++k)
      EXPECT_LE(d(q, r.rank_lists[i][k - 1]), d(q, r.rank_lists[i][k]));
  }
}

TEST(DcdOverlap, Examples) {
  EXPECT_EQ(dcd_overlap({1, 2, 3}, {3, 1, 2}, 10), 1.0);
  EXPECT_EQ(dcd_overlap({0.0, 0.1}, {0.9, 1.0}, 2), 0.0);
  EXPECT_NEAR(dcd_overlap({1, 1, 2}, {2, 3, 3}, 2), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(dcd_overlap({2, 2}, {2}, 5), 1.0);
}

TEST(DcdOverlap, AffineInvarianceAndBounds) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto w = uniform(40, rng, 0.0, 1.0), b = uniform(60, rng, 0.3, 1.5);
    const double o = dcd_overlap(w, b, 20);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 1.0);
    std::vector<double> w2, b2;
    for (double x : w) w2.push_back(4.0 * x + 2.0);
    for (double x : b) b2.push_back(4.0 * x + 2.0);
    EXPECT_NEAR(dcd_overlap(w2, b2, 20), o, 1e-12);
  }
}

TEST(DcdOverlap, InvalidInputs) {
  EXPECT_THROW(dcd_overlap({}, {1.0}, 5), InvalidArgument);
  EXPECT_THROW(dcd_overlap({1.0}, {}, 5), InvalidArgument);
  EXPECT_THROW(dcd_overlap({1.0}, {2.0}, 0), InvalidArgument);
}

TEST(Signature, WidthAndDeterminism) {
  auto t = toy();
  const auto& im = t.bench.query_occluded.front();
  const auto a = extract_signature(t.model, im), b = extract_signature(t.model, im);
  const auto& c = t.model.config();
  EXPECT_EQ(a.size(), static_cast<std::size_t>(c.widths.back() * (1 + c.parts)));
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_TRUE(std::isfinite(v));
}

TEST(Signature, MatchesManualComposition) {
  auto t = toy();
  const auto& im = t.bench.gallery[3];
  const auto sig = extract_signature(t.model, im);
  typename model::Encoder<double>::Cache ec;
  typename model::AttentionEmbedding<double>::Cache ac;
  const auto fmap = t.model.encode(synth::to_batch<double>(std::vector<synth::LabeledImage>{im}),
                                   model::Mode::inference, ec);
  const auto g = model::global_pool(fmap);
  const auto parts = model::part_pool(fmap, t.model.config().parts);
  const auto att = t.model.student_attention(parts, model::Mode::inference, ac);
  std::vector<double> manual(g.vec().begin(), g.vec().end());
  for (std::size_t k = 0; k < parts.size(); ++k) manual.push_back(parts[k] * att[k]);
  ASSERT_EQ(sig.size(), manual.size());
  for (std::size_t k = 0; k < sig.size(); ++k) EXPECT_NEAR(sig[k], manual[k], 1e-6);
}

TEST(Signature, BatchedExtractionMatchesSingleImages) {
  auto t = toy();
  const auto f = extract_features(t.model, t.bench.gallery, 3);
  const auto all = f.signatures();
  const int W = f.signature_width();
  for (std::size_t i = 0; i < t.bench.gallery.size(); ++i) {
    const auto one = extract_signature(t.model, t.bench.gallery[i]);
    for (int k = 0; k < W; ++k) EXPECT_NEAR(all[i * W + k], one[static_cast<std::size_t>(k)], 1e-12);
  }
}

TEST(Evaluate, GalleryAsQueryRanksSelfFirst) {
  auto t = toy();
  const auto s = evaluate(t.model, t.bench.gallery, t.bench.gallery, Metric::euclidean, {.camera_exclusion = false});
  EXPECT_EQ(s.report.rank(1), 1.0);
  EXPECT_EQ(s.report.metric, "euclidean");
  EXPECT_EQ(s.report.dcd_overlap, s.overlap_attended);
  const auto c = evaluate(t.model, t.bench.query_occluded, t.bench.gallery, Metric::cosine);
  EXPECT_EQ(c.report.metric, "cosine");
  EXPECT_EQ(c.report.valid_queries.size(), t.bench.query_occluded.size());
}

TEST(AnalyzeDcd, DomainsAndSummary) {
  auto t = toy();
  const auto a = analyze_dcd(t.model, t.bench.gallery, t.bench.query_occluded, dcd::KernelConfig{});
  ASSERT_EQ(a.domains.size(), 3u);
  EXPECT_EQ(a.domains[0].name, "holistic");
  EXPECT_EQ(a.domains[2].name, "occluded_attended");
  const auto n = static_cast<std::size_t>(t.bench.gallery.size());
  for (const auto& p : a.domains[0].parts) EXPECT_EQ(p.within.size() + p.between.size(), n * (n - 1) / 2);
  const auto j = a.summary();
  for (const char* k : {"overlap_holistic", "overlap_occluded_raw", "overlap_occluded_attended", "mmd_wc", "mmd_bc"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_GE(a.mmd_bc, 0.0);
  EXPECT_EQ(a.overlap_holistic, mean_overlap(a.domains[0], a.num_bins));
}

TEST(AnalyzeDcd, BetweenClassMmdMatchesOracle) {
  auto t = toy();
  const auto a = analyze_dcd(t.model, t.bench.gallery, t.bench.query_occluded, dcd::KernelConfig{});
  double bc = 0.0;
  for (std::size_t i = 0; i < a.domains[0].parts.size(); ++i) {
    const auto& h = a.domains[0].parts[i].between;
    const auto& o = a.domains[2].parts[i].between;
    std::vector<double> sigmas;
    for (double b : dcd::KernelConfig{}.bandwidths) sigmas.push_back(b * oracle::median_bandwidth(h, o));
    bc += oracle::mmd(h, o, sigmas);
  }
  EXPECT_NEAR(a.mmd_bc, bc / static_cast<double>(a.domains[0].parts.size()), 1e-9);
}

TEST(Figures, CmcSidecarEqualsReport) {
  test::TempDir dir;
  EvalReport r;
  r.cmc = {0.1, 1.0 / 3.0, 0.7, 1.0};
  export_cmc(dir.path(), r);
  const auto rows = read_csv(dir / "cmc.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"rank", "cmc"}));
  for (std::size_t k = 0; k < r.cmc.size(); ++k) {
    EXPECT_EQ(std::stoi(rows[k + 1][0]), static_cast<int>(k + 1));
    EXPECT_EQ(std::stod(rows[k + 1][1]), r.cmc[k]);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "cmc.png"));
}

TEST(Figures, DcdSidecarsConserveCounts) {
  test::TempDir dir;
  auto t = toy();
  const auto a = analyze_dcd(t.model, t.bench.gallery, t.bench.query_occluded, dcd::KernelConfig{});
  export_dcd(dir.path(), a.domains, 10);
  std::size_t samples = 0;
  std::map<std::string, long> per_domain;
  for (const auto& d : a.domains) {
    samples += d.pooled(true).size() + d.pooled(false).size();
    per_domain[d.name] = static_cast<long>(d.pooled(true).size() + d.pooled(false).size());
  }
  const auto rows = read_csv(dir / "dcd.csv");
  EXPECT_EQ(rows.size(), samples + 1);
  const auto hist = read_csv(dir / "dcd_hist.csv");
  ASSERT_EQ(hist.size(), 3u * 10u + 1u);
  std::map<std::string, long> counted;
  for (std::size_t i = 1; i < hist.size(); ++i) counted[hist[i][0]] += std::stol(hist[i][4]) + std::stol(hist[i][5]);
  EXPECT_EQ(counted, per_domain);
  const auto png = hg::read_png(dir / "dcd_hist.png");
  EXPECT_EQ(png.height, 3 * 160);
}

TEST(Figures, AttentionBandsPerPart) {
  test::TempDir dir;
  auto t = toy();
  const auto f = extract_features(t.model, t.bench.query_occluded);
  export_attention(dir.path(), t.bench.query_occluded, f.attention, 4);
  const auto rows = read_csv(dir / "attention.csv");
  const int p = t.model.config().parts;
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(4 * p + 1));
  std::map<int, std::set<int>> bands;
  for (std::size_t i = 1; i < rows.size(); ++i) bands[std::stoi(rows[i][0])].insert(std::stoi(rows[i][2]));
  ASSERT_EQ(bands.size(), 4u);
  for (const auto& [s, parts] : bands) EXPECT_EQ(static_cast<int>(parts.size()), p);
  // Sigmoid outputs.
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double m = std::stod(rows[i][3]);
    EXPECT_GT(m, 0.0);
    EXPECT_LT(m, 1.0);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "attention.png"));
  EXPECT_THROW(export_attention(dir.path(), t.bench.query_occluded, Tensor<double>({1, p, 2}), 4), InvalidArgument);
}

TEST(Figures, UnwritableDirectoryNamesPath) {
  EvalReport r;
  r.cmc = {1.0};
  try {
    export_cmc("/nonexistent/dir", r);
    FAIL() << "expected an io error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir"), std::string::npos);
  }
}
