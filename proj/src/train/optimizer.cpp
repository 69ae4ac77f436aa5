#include "train/optimizer.hpp"

#include <cmath>

#include "util/error.hpp"

namespace cellclip::train {

template <class T>
void adamw_step(ad::ParamList<T>& params, AdamState& state, double lr, const AdamWConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(Errc::state, "optimizer state holds {} moments for {} parameters", state.m.size(), params.size());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.m[i].size() != p.var.size() || state.v[i].size() != p.var.size()) {
      fail(Errc::shape, "optimizer moments for '{}' have the wrong size", p.name);
    }
    const auto g = p.var.grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(static_cast<double>(g[j]))) {
        fail(Errc::numeric, "non-finite gradient in '{}' at element {} (value {}) at step {}", p.name, j,
             static_cast<double>(g[j]), state.step);
      }
    }
  }

  const std::size_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto value = p.var.mutable_value();
    const auto g = p.var.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const double shrink = p.decay ? 1.0 - lr * config.weight_decay : 1.0;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      const double mj = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      const double vj = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double mhat = mj / c1;
      const double vhat = vj / c2;
      const double x = static_cast<double>(value[j]) * shrink - lr * mhat / (std::sqrt(vhat) + config.eps);
      value[j] = static_cast<T>(x);
    }
  }
  state.step = t;
}

template void adamw_step<float>(ad::ParamList<float>&, AdamState&, double, const AdamWConfig&);
template void adamw_step<double>(ad::ParamList<double>&, AdamState&, double, const AdamWConfig&);

}  // namespace cellclip::train
