#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hg/model/model.hpp"
#include "hg/rng.hpp"

namespace hg::test {

constexpr double kFdStep = 1e-4;
constexpr double kFdTol = 1e-4;
// Gradients smaller than this are compared on an absolute scale.
constexpr double kFdFloor = 1e-6;

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
}

// Central difference of `loss` in the scalar `x`; x is restored afterwards.
inline double central_diff(double& x, const std::function<double()>& loss, double h = kFdStep) {
  const double x0 = x;
  x = x0 + h;
  const double up = loss();
  x = x0 - h;
  const double down = loss();
  x = x0;
  return (up - down) / (2.0 * h);
}

struct Entry {
  model::Param<double>* param;
  std::size_t index;
};

struct FdReport {
  double max_rel = 0.0;
  int checked = 0;
};

// Compares param.grad at the chosen entries with central differences of `loss`.
// The gradients are read before `loss` runs, so `loss` may accumulate into them.
inline FdReport check_entries(const std::vector<Entry>& entries, const std::function<double()>& loss,
                              double h = kFdStep) {
  std::vector<double> analytic;
  for (const auto& e : entries) analytic.push_back(e.param->grad[e.index]);
  FdReport r;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double n = central_diff(entries[i].param->value[entries[i].index], loss, h);
    r.max_rel = std::max(r.max_rel, rel_err(analytic[i], n));
    ++r.checked;
  }
  return r;
}

inline std::vector<Entry> sample_entries(model::Param<double>& p, int count, Rng& rng) {
  std::vector<Entry> out;
  for (int i = 0; i < count; ++i) out.push_back({&p, static_cast<std::size_t>(uniform_index(rng, p.value.size()))});
  return out;
}

// `count` entries drawn uniformly over all scalars of the groups accepted by `pick`.
inline std::vector<Entry> sample_model_entries(model::Model<double>& m, const std::function<bool(model::Group)>& pick,
                                               int count, Rng& rng) {
  std::vector<model::Param<double>*> params;
  std::vector<std::size_t> offsets{0};
  m.for_each_param([&](model::Group g, model::Param<double>& p) {
    if (!pick(g)) return;
    params.push_back(&p);
    offsets.push_back(offsets.back() + p.value.size());
  });
  std::vector<Entry> out;
  for (int i = 0; i < count; ++i) {
    const std::size_t k = uniform_index(rng, offsets.back());
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), k) - 1;
    const auto j = static_cast<std::size_t>(it - offsets.begin());
    out.push_back({params[j], k - *it});
  }
  return out;
}

inline Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.vec()) v = uniform(rng, lo, hi);
  return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace hg::test
