#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "hg/model/model.hpp"

namespace hg::train {

template <typename S>
struct AdamSlot {
  Tensor<S> m;
  Tensor<S> v;
  long step = 0;
};

// Adam without weight decay; step counts are kept per parameter.
template <typename S>
class Adam {
 public:
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  Adam() = default;
  explicit Adam(double learning_rate) : lr(learning_rate) {}

  // Updates every parameter whose group passes `trainable`.
  void step(model::Model<S>& m, const std::function<bool(model::Group)>& trainable) {
    m.for_each_param([&](model::Group g, model::Param<S>& p) {
      if (!trainable(g)) return;
      auto& slot = slots_[p.name];
      if (slot.m.empty()) {
        slot.m = Tensor<S>(p.value.shape());
        slot.v = Tensor<S>(p.value.shape());
      }
      ++slot.step;
      const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
      const S c1 = static_cast<S>(1.0 - std::pow(beta1, static_cast<double>(slot.step)));
      const S c2 = static_cast<S>(1.0 - std::pow(beta2, static_cast<double>(slot.step)));
      const S rate = static_cast<S>(lr), e = static_cast<S>(eps);
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const S g_i = p.grad[i];
        slot.m[i] = b1 * slot.m[i] + (S(1) - b1) * g_i;
        slot.v[i] = b2 * slot.v[i] + (S(1) - b2) * g_i * g_i;
        const S mhat = slot.m[i] / c1;
        const S vhat = slot.v[i] / c2;
        p.value[i] -= rate * mhat / (std::sqrt(vhat) + e);
      }
    });
  }

  std::map<std::string, AdamSlot<S>>& slots() { return slots_; }
  const std::map<std::string, AdamSlot<S>>& slots() const { return slots_; }

 private:
  std::map<std::string, AdamSlot<S>> slots_;
};

}  // namespace hg::train
