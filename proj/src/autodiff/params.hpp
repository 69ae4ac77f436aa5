#pragma once

#include <string>
#include <vector>

#include "autodiff/tensor.hpp"
#include "util/rng.hpp"

namespace cellclip::ad {

// A trainable tensor with a stable checkpoint name.
template <class T>
struct Param {
  std::string name;
  Var<T> var;
  bool decay = true;  // subject to decoupled weight decay
};

template <class T>
using ParamList = std::vector<Param<T>>;

// Truncated normal (±2σ) weights or constant fill. Values are drawn in double
// and then rounded, so float and double builds of a model share one init.
template <class T>
Var<T> init_trunc_normal(Rng& rng, Shape shape, double std) {
  std::vector<T> v(shape.size());
  for (auto& x : v) x = static_cast<T>(rng.truncated_normal(std));
  return Var<T>::leaf(shape, std::move(v), true);
}

template <class T>
Var<T> init_constant(Shape shape, double value) {
  return Var<T>::leaf(shape, std::vector<T>(shape.size(), static_cast<T>(value)), true);
}

template <class T>
void append(ParamList<T>& out, const std::string& prefix, ParamList<T> more) {
  for (auto& p : more) {
    p.name = prefix + p.name;
    out.push_back(std::move(p));
  }
}

}  // namespace cellclip::ad
