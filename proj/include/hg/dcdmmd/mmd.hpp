#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hg/error.hpp"

namespace hg::dcd {

enum class BandwidthMode { fixed, median_scaled };

// RBF kernel bank k(x,y) = sum_s exp(-(x-y)^2 / (2 sigma_s^2)).
// In median_scaled mode the listed values multiply the median heuristic.
struct KernelConfig {
  std::vector<double> bandwidths{0.25, 0.5, 1.0, 2.0, 4.0};
  BandwidthMode mode = BandwidthMode::median_scaled;

  void validate() const {
    require(!bandwidths.empty(), "KernelConfig: at least one bandwidth required");
    for (double b : bandwidths)
      require(std::isfinite(b) && b > 0.0, "KernelConfig: bandwidths must be positive and finite");
  }
};

namespace detail {

// Number of pairs (i<j) of the sorted sequence whose difference is <= t.
inline std::size_t count_pairs_leq(const std::vector<double>& sorted, double t) {
  std::size_t count = 0, j = 0;
  const std::size_t n = sorted.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (j < i + 1) j = i + 1;
    while (j < n && sorted[j] - sorted[i] <= t) ++j;
    count += j - i - 1;
  }
  return count;
}

// k-th smallest (1-based) pairwise difference of a sorted sequence, exact, by bisection
// on the value axis until the bracket collapses to adjacent doubles.
inline double kth_pairwise_difference(const std::vector<double>& sorted, std::size_t k) {
  if (count_pairs_leq(sorted, 0.0) >= k) return 0.0;
  double lo = 0.0;
  double hi = sorted.back() - sorted.front();
  while (true) {
    const double mid = lo + (hi - lo) / 2.0;
    if (mid <= lo || mid >= hi) break;
    if (count_pairs_leq(sorted, mid) >= k)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Sorted ascending coefficients c = 1/(2 sigma^2) plus, for each entry after the first,
// the number of squarings that map the previous kernel value onto it (0 = evaluate exp).
struct RbfBank {
  std::vector<double> coef;
  std::vector<int> squarings;

  explicit RbfBank(std::span<const double> sigmas) {
    for (double s : sigmas) coef.push_back(1.0 / (2.0 * s * s));
    std::sort(coef.begin(), coef.end());
    squarings.assign(coef.size(), 0);
    for (std::size_t k = 1; k < coef.size(); ++k) {
      const double ratio = coef[k] / coef[k - 1];
      const double r = std::round(ratio);
      if (r >= 2.0 && r <= 256.0 && std::abs(ratio - r) <= 1e-12 * ratio) {
        int n = 0;
        double v = r;
        while (v > 1.0 && std::fmod(v, 2.0) == 0.0) {
          v /= 2.0;
          ++n;
        }
        if (v == 1.0) squarings[k] = n;
      }
    }
  }

  // One pivot x against y[0..len): returns sum_j k(x - y_j). With w_j = (x - y_j) * sum_s 2 c_s k_s
  // (so that dk/dx = -w_j), adds sign * w_j to g[j] when g is given and sum_j w_j to *wsum.
  double row(double x, const double* y, std::size_t len, double* g = nullptr, double sign = 1.0,
             double* wsum = nullptr) const {
    using namespace Eigen::internal;
    using P = packet_traits<double>::type;
    constexpr std::size_t L = sizeof(P) / sizeof(double);
    const P px = pset1<P>(x);
    P acc_v = pzero(px), acc_w = pzero(px);
    const auto lane = [&](const P& py, P& v, P& w) {
      const P d = psub(px, py);
      const P sq = pmul(d, d);
      P e = pexp(pmul(pset1<P>(-coef[0]), sq));
      v = e;
      P der = pmul(pset1<P>(2.0 * coef[0]), e);
      for (std::size_t k = 1; k < coef.size(); ++k) {
        if (squarings[k] > 0)
          for (int q = 0; q < squarings[k]; ++q) e = pmul(e, e);
        else
          e = pexp(pmul(pset1<P>(-coef[k]), sq));
        v = padd(v, e);
        der = pmadd(pset1<P>(2.0 * coef[k]), e, der);
      }
      w = pmul(d, der);
    };
    std::size_t j = 0;
    for (; j + L <= len; j += L) {
      P v, w;
      lane(ploadu<P>(y + j), v, w);
      acc_v = padd(acc_v, v);
      if (g) pstoreu(g + j, pmadd(pset1<P>(sign), w, ploadu<P>(g + j)));
      if (wsum) acc_w = padd(acc_w, w);
    }
    double total = predux(acc_v);
    double wtot = wsum ? predux(acc_w) : 0.0;
    if (j < len) {
      alignas(64) double buf[L], vb[L], wb[L];
      for (std::size_t t = 0; t < L; ++t) buf[t] = j + t < len ? y[j + t] : x;
      P v, w;
      lane(pload<P>(buf), v, w);
      pstore(vb, v);
      pstore(wb, w);
      for (std::size_t t = 0; j + t < len; ++t) {
        total += vb[t];
        if (g) g[j + t] += sign * wb[t];
        wtot += wb[t];
      }
    }
    if (wsum) *wsum += wtot;
    return total;
  }

  double at_zero() const { return static_cast<double>(coef.size()); }
};
}  // namespace detail

// Median of all pairwise absolute differences of the pooled samples; 1.0 when that median is 0.
inline double median_bandwidth(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  require(pooled.size() >= 2, "median_bandwidth: need at least two pooled samples");
  std::sort(pooled.begin(), pooled.end());
  const std::size_t n = pooled.size();
  const std::size_t pairs = n * (n - 1) / 2;
  double med;
  if (pairs % 2 == 1) {
    med = detail::kth_pairwise_difference(pooled, (pairs + 1) / 2);
  } else {
    med = 0.5 * (detail::kth_pairwise_difference(pooled, pairs / 2) +
                 detail::kth_pairwise_difference(pooled, pairs / 2 + 1));
  }
  return med > 0.0 ? med : 1.0;
}

// Absolute bandwidths for one MMD evaluation.
inline std::vector<double> resolve_bandwidths(const KernelConfig& kernel, std::span<const double> a,
                                              std::span<const double> b) {
  kernel.validate();
  if (kernel.mode == BandwidthMode::fixed) return kernel.bandwidths;
  const double sigma = median_bandwidth(a, b);
  std::vector<double> out;
  out.reserve(kernel.bandwidths.size());
  for (double s : kernel.bandwidths) out.push_back(sigma * s);
  return out;
}

struct MmdResult {
  double value = 0.0;  // clamped at 0
  double raw = 0.0;    // before clamping
  std::vector<double> grad_b;  // d value / d b_j (empty unless requested)
};

namespace detail {

// Kernel sums of one MMD evaluation: S_aa, S_bb, S_ab (full double sums, diagonals included),
// rb_t = sum_j dk(b_t, b_j)/db_t and cb_t = sum_g dk(a_g, b_t)/db_t.
struct KernelSums {
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  std::vector<double> rb, cb;
};

// The cross sum iterates over the canonically smaller list so that mmd(a,b) and mmd(b,a)
// perform identical floating-point operations.
inline bool rows_over_first(std::span<const double> a, std::span<const double> b) {
  return a.size() < b.size() ||
         (a.size() == b.size() && !std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()));
}

inline KernelSums direct_sums(std::span<const double> a, std::span<const double> b, const RbfBank& bank,
                              bool need_grad) {
  const std::size_t n = a.size(), m = b.size();
  KernelSums k;
  k.saa = bank.at_zero() * static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i) k.saa += 2.0 * bank.row(a[i], a.data() + i + 1, n - i - 1);
  k.sbb = bank.at_zero() * static_cast<double>(m);
  k.rb.assign(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (need_grad) {
      double ws = 0.0;
      k.sbb += 2.0 * bank.row(b[i], b.data() + i + 1, m - i - 1, k.rb.data() + i + 1, 1.0, &ws);
      k.rb[i] -= ws;
    } else {
      k.sbb += 2.0 * bank.row(b[i], b.data() + i + 1, m - i - 1);
    }
  }
  k.cb.assign(m, 0.0);
  if (rows_over_first(a, b)) {
    for (std::size_t i = 0; i < n; ++i) k.sab += bank.row(a[i], b.data(), m, need_grad ? k.cb.data() : nullptr);
  } else {
    for (std::size_t t = 0; t < m; ++t) {
      double ws = 0.0;
      k.sab += bank.row(b[t], a.data(), n, nullptr, 1.0, need_grad ? &ws : nullptr);
      k.cb[t] = -ws;
    }
  }
  return k;
}

// One-dimensional Gauss transform G(x) = sum_j exp(-(x - y_j)^2 / h^2) by truncated Hermite
// expansions about the centres of boxes of width h. Remainder per term < 1e-15 of the source
// count; boxes farther than kReach widths from a target are skipped (contribution < 1e-35).
class GaussTransform {
 public:
  static constexpr int kTerms = 24;
  static constexpr int kReach = 10;

  GaussTransform(std::span<const double> sources, double h) : h_(h) {
    const auto [lo, hi] = std::minmax_element(sources.begin(), sources.end());
    origin_ = *lo;
    boxes_ = static_cast<std::size_t>(std::floor((*hi - *lo) / h_)) + 1;
    coef_.assign(boxes_ * kTerms, 0.0);
    for (double y : sources) {
      const std::size_t k = box_of(y);
      const double s = (y - centre(k)) / h_;
      double* A = coef_.data() + k * kTerms;
      double p = 1.0;
      for (int n = 0; n < kTerms; ++n) {
        A[n] += p;
        p *= s / (n + 1);
      }
    }
  }

  static std::size_t box_count(std::span<const double> sources, double h) {
    const auto [lo, hi] = std::minmax_element(sources.begin(), sources.end());
    return static_cast<std::size_t>(std::floor((*hi - *lo) / h)) + 1;
  }

  // Adds G(x_i) to val[i] and, when der is given, G'(x_i) to der[i]. `sorted` lists the
  // targets in ascending order.
  void eval(const std::vector<double>& sorted, std::vector<double>& val, std::vector<double>* der) const {
    const std::size_t T = sorted.size();
    std::size_t first = 0;
    Eigen::ArrayXd t, hprev, hcur, hnext, v, d;
    for (std::size_t k = 0; k < boxes_; ++k) {
      const double* A = coef_.data() + k * kTerms;
      if (A[0] == 0.0) continue;
      const double c = centre(k);
      const double lo = c - (kReach + 0.5) * h_, hi = c + (kReach + 0.5) * h_;
      while (first < T && sorted[first] < lo) ++first;
      std::size_t last = first;
      while (last < T && sorted[last] <= hi) ++last;
      const auto len = static_cast<Eigen::Index>(last - first);
      if (len == 0) continue;
      t = (Eigen::Map<const Eigen::ArrayXd>(sorted.data() + first, len) - c) / h_;
      hprev = (-t.square()).exp();
      hcur = 2.0 * t * hprev;
      v = A[0] * hprev;
      if (der) d = A[0] * hcur;
      for (int n = 1; n < kTerms; ++n) {
        v += A[n] * hcur;
        hnext = 2.0 * t * hcur - (2.0 * n) * hprev;
        if (der) d += A[n] * hnext;
        std::swap(hprev, hcur);
        std::swap(hcur, hnext);
      }
      Eigen::Map<Eigen::ArrayXd>(val.data() + first, len) += v;
      if (der) Eigen::Map<Eigen::ArrayXd>(der->data() + first, len) -= d / h_;
    }
  }

 private:
  std::size_t box_of(double y) const {
    return std::min(boxes_ - 1, static_cast<std::size_t>(std::floor((y - origin_) / h_)));
  }
  double centre(std::size_t k) const { return origin_ + (static_cast<double>(k) + 0.5) * h_; }

  double h_;
  double origin_ = 0.0;
  std::size_t boxes_ = 0;
  std::vector<double> coef_;  // boxes x kTerms, A_n = sum_j s_j^n / n!
};

// Targets sorted ascending with their original positions.
struct SortedTargets {
  std::vector<double> values;
  std::vector<std::size_t> order;

  explicit SortedTargets(std::span<const double> x) : order(x.size()) {
    for (std::size_t i = 0; i < x.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
    values.reserve(x.size());
    for (std::size_t i : order) values.push_back(x[i]);
  }
};

// Sum over the kernel bank of G and G' for sources `src` at `targets`, in original target order.
inline void bank_transform(std::span<const double> src, const SortedTargets& targets, const RbfBank& bank,
                           std::vector<double>& val, std::vector<double>* der) {
  const std::size_t T = targets.values.size();
  std::vector<double> v(T, 0.0), d;
  if (der) d.assign(T, 0.0);
  for (double c : bank.coef) {
    const GaussTransform g(src, 1.0 / std::sqrt(c));
    g.eval(targets.values, v, der ? &d : nullptr);
  }
  val.assign(T, 0.0);
  if (der) der->assign(T, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    val[targets.order[i]] = v[i];
    if (der) (*der)[targets.order[i]] = d[i];
  }
}

inline double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline KernelSums fast_sums(std::span<const double> a, std::span<const double> b, const RbfBank& bank,
                            bool need_grad) {
  const SortedTargets ta(a), tb(b);
  KernelSums k;
  std::vector<double> val, der;
  bank_transform(a, ta, bank, val, nullptr);
  k.saa = ordered_sum(val);
  bank_transform(b, tb, bank, val, need_grad ? &k.rb : nullptr);
  k.sbb = ordered_sum(val);
  // G_b'(b_t) = rb_t and G_a'(b_t) = cb_t.
  bank_transform(a, tb, bank, val, need_grad ? &der : nullptr);
  if (rows_over_first(a, b)) {
    k.sab = ordered_sum(val);
  } else {
    std::vector<double> vb;
    bank_transform(b, ta, bank, vb, nullptr);
    k.sab = ordered_sum(vb);
  }
  if (need_grad) {
    k.cb = std::move(der);
  } else {
    k.rb.assign(b.size(), 0.0);
    k.cb.assign(b.size(), 0.0);
  }
  return k;
}

// Direct evaluation costs about n*m pair evaluations; the expansion about T * boxes * terms.
inline bool prefer_fast(std::span<const double> a, std::span<const double> b, const RbfBank& bank) {
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  if (n * m < 262144.0) return false;
  double fast = 0.0;
  for (double c : bank.coef) {
    const double h = 1.0 / std::sqrt(c);
    const double boxes = static_cast<double>(std::max(GaussTransform::box_count(a, h), GaussTransform::box_count(b, h)));
    fast += (2.0 * n + 2.0 * m) * std::min(boxes, 2.0 * GaussTransform::kReach + 1.0) * GaussTransform::kTerms;
  }
  return fast < 2.0 * n * m;
}

}  // namespace detail

// Biased (V-statistic) squared MMD between a and b under fixed absolute bandwidths.
// Gradients are taken w.r.t. the second sample list only; use symmetry for the first.
// Large inputs go through series-expanded Gauss transforms (agreeing with the direct sums
// to roughly machine precision).
inline MmdResult mmd_with_grad(std::span<const double> a, std::span<const double> b,
                               std::span<const double> sigmas, bool need_grad) {
  require(!a.empty() && !b.empty(), "mmd: sample lists must be non-empty");
  require(!sigmas.empty(), "mmd: at least one bandwidth required");
  for (double s : sigmas) require(s > 0.0 && std::isfinite(s), "mmd: bandwidths must be positive");
  for (double v : a) require(std::isfinite(v), "mmd: non-finite sample");
  for (double v : b) require(std::isfinite(v), "mmd: non-finite sample");
  const detail::RbfBank bank(sigmas);
  const auto k = detail::prefer_fast(a, b, bank) ? detail::fast_sums(a, b, bank, need_grad)
                                                 : detail::direct_sums(a, b, bank, need_grad);
  const double nn = static_cast<double>(a.size()), mm = static_cast<double>(b.size());
  MmdResult r;
  r.raw = k.saa / (nn * nn) + k.sbb / (mm * mm) - 2.0 * k.sab / (nn * mm);
  r.value = std::max(r.raw, 0.0);
  if (need_grad) {
    r.grad_b.assign(b.size(), 0.0);
    if (r.raw > 0.0)
      for (std::size_t t = 0; t < b.size(); ++t) r.grad_b[t] = 2.0 * k.rb[t] / (mm * mm) - 2.0 * k.cb[t] / (nn * mm);
  }
  return r;
}

// Reference evaluation that never uses the series expansion.
inline MmdResult mmd_direct(std::span<const double> a, std::span<const double> b, std::span<const double> sigmas,
                            bool need_grad) {
  require(!a.empty() && !b.empty() && !sigmas.empty(), "mmd: non-empty inputs required");
  const detail::RbfBank bank(sigmas);
  const auto k = detail::direct_sums(a, b, bank, need_grad);
  const double nn = static_cast<double>(a.size()), mm = static_cast<double>(b.size());
  MmdResult r;
  r.raw = k.saa / (nn * nn) + k.sbb / (mm * mm) - 2.0 * k.sab / (nn * mm);
  r.value = std::max(r.raw, 0.0);
  if (need_grad) {
    r.grad_b.assign(b.size(), 0.0);
    if (r.raw > 0.0)
      for (std::size_t t = 0; t < b.size(); ++t) r.grad_b[t] = 2.0 * k.rb[t] / (mm * mm) - 2.0 * k.cb[t] / (nn * mm);
  }
  return r;
}

// Squared MMD between two scalar sample lists under `kernel`.
inline double mmd(std::span<const double> a, std::span<const double> b, const KernelConfig& kernel) {
  require(!a.empty() && !b.empty(), "mmd: sample lists must be non-empty");
  const auto sigmas = resolve_bandwidths(kernel, a, b);
  return mmd_with_grad(a, b, sigmas, false).value;
}

}  // namespace hg::dcd
