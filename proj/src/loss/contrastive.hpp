#pragma once

// Contrastive objectives over a batch of N aligned pairs (P[i], Q[i]).
// P and Q are N×dim with unit-norm rows.

#include <cstddef>
#include <span>
#include <vector>

#include "autodiff/params.hpp"
#include "profile/profile.hpp"

namespace cellclip::loss {

enum class ScaleMode {
  multiplier,  // logits = s * sim
  divisor,     // logits = sim / s
};

inline constexpr double kMaxLogitScale = 100.0;
inline constexpr double kDefaultLogitScale = 14.3;

// Learnable s = exp(theta), clamped to (0, 100].
template <class T>
class LogitScale {
 public:
  LogitScale() = default;
  explicit LogitScale(double initial, ScaleMode mode = ScaleMode::multiplier);

  // The factor applied to cosine similarities (s, or 1/s in divisor mode).
  ad::Var<T> factor() const;
  double value() const;  // current s
  // Keeps theta inside the clamp so its gradient stays live.
  void clamp();

  ad::Param<T> parameter() const { return {"theta", theta_, false}; }
  ScaleMode mode() const { return mode_; }

 private:
  ad::Var<T> theta_;
  ScaleMode mode_ = ScaleMode::multiplier;
};

// Symmetric soft targets in [0, 1] with unit diagonal, row-major N×N.
struct WeightMatrix {
  std::size_t n = 0;
  std::vector<double> w;

  double at(std::size_t i, std::size_t j) const { return w[i * n + j]; }
  // Throws unless square, symmetric, in [0, 1] and diag = 1 within 1e-6.
  void validate() const;
};

WeightMatrix cwcl_weights(std::span<const profile::PooledProfile> pooled);

template <class T>
ad::Var<T> similarity_logits(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor);

// Cross-entropy of each profile against all texts (U->V) and of each text
// against all profiles (V->U), averaged over N.
template <class T>
ad::Var<T> clip_loss_u2v(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor);
template <class T>
ad::Var<T> clip_loss_v2u(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor);
// Sum of both directions.
template <class T>
ad::Var<T> clip_loss(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor);

// -(1/N) sum_i (1/sum_j W_ij) sum_j W_ij log softmax_j(logit_ij). W is constant.
template <class T>
ad::Var<T> cwcl_loss(const ad::Var<T>& p, const ad::Var<T>& q, const WeightMatrix& w,
                     const ad::Var<T>& factor);

// cwcl_loss (U->V) + clip_loss_v2u.
template <class T>
ad::Var<T> total_loss(const ad::Var<T>& p, const ad::Var<T>& q, const WeightMatrix& w,
                      const ad::Var<T>& factor);

inline constexpr double kDefaultSigmoidBias = -10.0;

// -(1/N) sum_ij log sigmoid(z_ij (factor * sim_ij + bias)), z = +1 on the diagonal.
template <class T>
ad::Var<T> sigmoid_pair_loss(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor,
                             const ad::Var<T>& bias);

}  // namespace cellclip::loss
