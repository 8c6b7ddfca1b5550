#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hg/error.hpp"

namespace hg::eval {

enum class Metric { euclidean, cosine };

inline const char* metric_name(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw InvalidArgument("unknown metric '" + s + "' (expected euclidean or cosine)");
}

// Row-major Q x G matrix of doubles.
struct DistanceMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double operator()(int q, int g) const { return values[static_cast<std::size_t>(q) * cols + g]; }
  double& operator()(int q, int g) { return values[static_cast<std::size_t>(q) * cols + g]; }
};

// Signatures are given as row-major matrices of `width` columns.
inline DistanceMatrix distance_matrix(const std::vector<double>& query, const std::vector<double>& gallery, int width,
                                      Metric metric) {
  require(width > 0, "distance_matrix: width must be positive");
  require(query.size() % width == 0 && gallery.size() % width == 0, "distance_matrix: ragged signature matrices");
  const int Q = static_cast<int>(query.size() / width);
  const int G = static_cast<int>(gallery.size() / width);
  DistanceMatrix d{Q, G, std::vector<double>(static_cast<std::size_t>(Q) * G)};
  std::vector<double> qn(Q), gn(G);
  if (metric == Metric::cosine) {
    for (int q = 0; q < Q; ++q) {
      double s = 0;
      for (int k = 0; k < width; ++k) s += query[q * width + k] * query[q * width + k];
      qn[q] = std::sqrt(s);
      require(qn[q] > 0.0, "distance_matrix: zero query vector at index " + std::to_string(q) + " under cosine");
    }
    for (int g = 0; g < G; ++g) {
      double s = 0;
      for (int k = 0; k < width; ++k) s += gallery[g * width + k] * gallery[g * width + k];
      gn[g] = std::sqrt(s);
      require(gn[g] > 0.0, "distance_matrix: zero gallery vector at index " + std::to_string(g) + " under cosine");
    }
  }
  for (int q = 0; q < Q; ++q)
    for (int g = 0; g < G; ++g) {
      const double* a = query.data() + static_cast<std::size_t>(q) * width;
      const double* b = gallery.data() + static_cast<std::size_t>(g) * width;
      if (metric == Metric::euclidean) {
        double s = 0;
        for (int k = 0; k < width; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        d(q, g) = std::sqrt(s);
      } else {
        double dot = 0;
        for (int k = 0; k < width; ++k) dot += a[k] * b[k];
        d(q, g) = 1.0 - dot / (qn[q] * gn[g]);
      }
    }
  return d;
}

struct EvalOptions {
  bool camera_exclusion = true;    // drop same-identity, same-camera gallery entries
  bool exclude_same_index = false;  // drop gallery entry q for query q (query set == gallery set)
};

struct EvalReport {
  std::vector<double> cmc;  // cmc[k-1] = CMC@k
  double map = 0.0;
  double dcd_overlap = 0.0;
  std::vector<std::vector<int>> rank_lists;  // per valid query: gallery indices, ascending distance
  std::vector<int> valid_queries;
  int skipped_queries = 0;
  std::string metric = "euclidean";
  std::string exclusion_rule = "same-id-same-camera";

  double rank(int k) const {
    if (cmc.empty()) return 0.0;
    return cmc[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(cmc.size())) - 1)];
  }
};

// CMC curve and mAP under the Market-1501 protocol.
inline EvalReport cmc_map(const DistanceMatrix& dist, const std::vector<int>& q_ids, const std::vector<int>& q_cams,
                          const std::vector<int>& g_ids, const std::vector<int>& g_cams, const EvalOptions& opt = {}) {
  const int Q = dist.rows, G = dist.cols;
  require(static_cast<int>(q_ids.size()) == Q && static_cast<int>(q_cams.size()) == Q,
          "cmc_map: query annotations do not match the distance matrix");
  require(static_cast<int>(g_ids.size()) == G && static_cast<int>(g_cams.size()) == G,
          "cmc_map: gallery annotations do not match the distance matrix");
  if (opt.exclude_same_index) require(Q == G, "cmc_map: self exclusion needs query set == gallery set");
  EvalReport rep;
  rep.exclusion_rule = opt.camera_exclusion ? "same-id-same-camera" : "none";
  if (opt.exclude_same_index) rep.exclusion_rule += "+self";
  rep.cmc.assign(static_cast<std::size_t>(std::max(G, 1)), 0.0);
  double ap_sum = 0.0;
  std::vector<int> order(static_cast<std::size_t>(G));
  for (int q = 0; q < Q; ++q) {
    order.clear();
    for (int g = 0; g < G; ++g) {
      if (opt.camera_exclusion && g_ids[g] == q_ids[q] && g_cams[g] == q_cams[q]) continue;
      if (opt.exclude_same_index && g == q) continue;
      order.push_back(g);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist(q, a) < dist(q, b); });
    int relevant = 0;
    for (int g : order) relevant += g_ids[g] == q_ids[q];
    if (relevant == 0) {
      ++rep.skipped_queries;
      continue;
    }
    int hits = 0, first = -1;
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (g_ids[order[r]] != q_ids[q]) continue;
      ++hits;
      if (first < 0) first = static_cast<int>(r);
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    ap_sum += ap / relevant;
    for (std::size_t k = static_cast<std::size_t>(first); k < rep.cmc.size(); ++k) rep.cmc[k] += 1.0;
    rep.valid_queries.push_back(q);
    rep.rank_lists.push_back(order);
  }
  const auto n = static_cast<double>(rep.valid_queries.size());
  if (n > 0) {
    for (auto& c : rep.cmc) c /= n;
    rep.map = ap_sum / n;
  } else {
    std::fill(rep.cmc.begin(), rep.cmc.end(), 0.0);
  }
  return rep;
}

// Histogram overlap of within- and between-class distance samples over shared equal-width bins.
inline double dcd_overlap(const std::vector<double>& within, const std::vector<double>& between, int num_bins = 50) {
  require(!within.empty() && !between.empty(), "dcd_overlap: sample lists must be non-empty");
  require(num_bins >= 1, "dcd_overlap: num_bins must be >= 1");
  const auto [wmin, wmax] = std::minmax_element(within.begin(), within.end());
  const auto [bmin, bmax] = std::minmax_element(between.begin(), between.end());
  const double lo = std::min(*wmin, *bmin), hi = std::max(*wmax, *bmax);
  if (!(hi > lo)) return 1.0;
  const auto bin = [&](double v) {
    const int b = static_cast<int>((v - lo) / (hi - lo) * num_bins);
    return std::clamp(b, 0, num_bins - 1);
  };
  std::vector<double> hw(static_cast<std::size_t>(num_bins)), hb(static_cast<std::size_t>(num_bins));
  for (double v : within) hw[static_cast<std::size_t>(bin(v))] += 1.0;
  for (double v : between) hb[static_cast<std::size_t>(bin(v))] += 1.0;
  double s = 0.0;
  for (int b = 0; b < num_bins; ++b)
    s += std::min(hw[b] / static_cast<double>(within.size()), hb[b] / static_cast<double>(between.size()));
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace hg::eval
