#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "autodiff/params.hpp"

namespace cellclip::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// First and second moments per parameter, in parameter-list order.
struct AdamState {
  std::size_t step = 0;  // updates applied so far
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  template <class T>
  void init(const ad::ParamList<T>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.var.size(), 0.0f);
      v.emplace_back(p.var.size(), 0.0f);
    }
  }
};

// One decoupled-decay Adam update using each parameter's accumulated
// gradient (a missing gradient counts as zero). The decay p *= 1 - lr*wd is
// applied before the moment step, and only to parameters with decay = true.
// Throws Errc::numeric naming the parameter if a gradient is not finite; no
// parameter is modified in that case.
template <class T>
void adamw_step(ad::ParamList<T>& params, AdamState& state, double lr, const AdamWConfig& config);

}  // namespace cellclip::train
