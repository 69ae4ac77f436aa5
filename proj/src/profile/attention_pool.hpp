#pragma once

#include <cstddef>

#include "autodiff/params.hpp"
#include "profile/profile.hpp"

namespace cellclip::profile {

struct AttentionPoolConfig {
  std::size_t hidden = 128;
  // One (w, V, U) per channel instead of one shared set.
  bool per_channel = false;
};

// Differentiable gated attention pooling (attention-based MIL).
template <class T>
class GatedAttentionPool {
 public:
  struct Output {
    ad::Var<T> pooled;     // C×d
    ad::Var<T> attention;  // C×N, rows sum to one
  };

  GatedAttentionPool() = default;
  GatedAttentionPool(std::size_t channels, std::size_t dim, AttentionPoolConfig config, Rng& rng);
  // Fixed parameters, no gradient; used by the plain-data entry point.
  GatedAttentionPool(std::size_t channels, const GatedAttentionParams& params);

  Output forward(const InstanceBag& bag) const;

  ad::ParamList<T> parameters() const;
  std::size_t channels() const { return channels_; }
  std::size_t dim() const { return dim_; }
  const AttentionPoolConfig& config() const { return config_; }

 private:
  struct Gate {
    ad::Var<T> V;  // L×d
    ad::Var<T> U;  // L×d
    ad::Var<T> w;  // L×1
  };
  ad::Var<T> scores(const Gate& g, const ad::Var<T>& z) const;

  std::size_t channels_ = 0;
  std::size_t dim_ = 0;
  AttentionPoolConfig config_;
  std::vector<Gate> gates_;
};

// Bag instances as a constant C*N × d tensor, channel-major (row c*N + k).
template <class T>
ad::Var<T> bag_tensor(const InstanceBag& bag);

}  // namespace cellclip::profile
