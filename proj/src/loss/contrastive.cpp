#include "loss/contrastive.hpp"

#include <cmath>

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::loss {

namespace {

template <class T>
void check_pair(const ad::Var<T>& p, const ad::Var<T>& q) {
  if (!(p.shape() == q.shape())) {
    fail(Errc::shape, "loss: P is {}x{} but Q is {}x{}", p.rows(), p.cols(), q.rows(), q.cols());
  }
}

template <class T>
void check_unit_rows(const ad::Var<T>& x, const char* which) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) ss += double(x.at(i, j)) * x.at(i, j);
    if (std::abs(std::sqrt(ss) - 1.0) > 1e-4) {
      fail(Errc::invalid_argument, "loss: row {} of {} has norm {}, expected 1", i, which, std::sqrt(ss));
    }
  }
}

template <class T>
ad::Var<T> identity(std::size_t n) {
  std::vector<T> v(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = T(1);
  return ad::Var<T>::leaf({n, n}, std::move(v));
}

// -(1/N) sum_i log_softmax(logits)_ii
template <class T>
ad::Var<T> diagonal_nll(const ad::Var<T>& logits) {
  const std::size_t n = logits.rows();
  return ad::scale(ad::sum(ad::mul(ad::log_softmax_rows(logits), identity<T>(n))),
                   -1.0 / static_cast<double>(n));
}

}  // namespace

template <class T>
LogitScale<T>::LogitScale(double initial, ScaleMode mode) : mode_(mode) {
  if (!(initial > 0.0) || initial > kMaxLogitScale) {
    fail(Errc::invalid_argument, "logit scale must lie in (0, {}], got {}", kMaxLogitScale, initial);
  }
  theta_ = ad::Var<T>::scalar(static_cast<T>(std::log(initial)), true);
}

template <class T>
ad::Var<T> LogitScale<T>::factor() const {
  if (mode_ == ScaleMode::multiplier) return ad::clamp_max(ad::exp(theta_), kMaxLogitScale);
  return ad::exp(ad::scale(theta_, -1.0));
}

template <class T>
double LogitScale<T>::value() const {
  return std::min(std::exp(static_cast<double>(theta_.item())), kMaxLogitScale);
}

template <class T>
void LogitScale<T>::clamp() {
  auto v = theta_.mutable_value();
  const T hi = static_cast<T>(std::log(kMaxLogitScale));
  if (v[0] > hi) v[0] = hi;
}

void WeightMatrix::validate() const {
  if (w.size() != n * n || n == 0) fail(Errc::shape, "weight matrix must be non-empty and square");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(at(i, i) - 1.0) > 1e-6) fail(Errc::invalid_argument, "weight matrix diagonal {} is {}", i, at(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      const double v = at(i, j);
      if (!(v >= 0.0 && v <= 1.0)) fail(Errc::invalid_argument, "weight ({}, {}) = {} outside [0, 1]", i, j, v);
      if (v != at(j, i)) fail(Errc::invalid_argument, "weight matrix is not symmetric at ({}, {})", i, j);
    }
  }
}

WeightMatrix cwcl_weights(std::span<const profile::PooledProfile> pooled) {
  if (pooled.empty()) fail(Errc::invalid_argument, "cwcl_weights: no profiles");
  WeightMatrix m{pooled.size(), std::vector<double>(pooled.size() * pooled.size())};
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i; j < m.n; ++j) {
      const double v = profile::cwcl_weight(pooled[i], pooled[j]);
      m.w[i * m.n + j] = v;
      m.w[j * m.n + i] = v;
    }
  }
  return m;
}

template <class T>
ad::Var<T> similarity_logits(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor) {
  check_pair(p, q);
  return ad::mul_scalar(ad::matmul(p, ad::transpose(q)), factor);
}

template <class T>
ad::Var<T> clip_loss_u2v(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor) {
  check_pair(p, q);
  check_unit_rows(p, "P");
  check_unit_rows(q, "Q");
  return diagonal_nll(similarity_logits(p, q, factor));
}

template <class T>
ad::Var<T> clip_loss_v2u(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor) {
  check_pair(p, q);
  check_unit_rows(p, "P");
  check_unit_rows(q, "Q");
  return diagonal_nll(ad::transpose(similarity_logits(p, q, factor)));
}

template <class T>
ad::Var<T> clip_loss(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor) {
  return ad::add(clip_loss_u2v(p, q, factor), clip_loss_v2u(p, q, factor));
}

template <class T>
ad::Var<T> cwcl_loss(const ad::Var<T>& p, const ad::Var<T>& q, const WeightMatrix& w,
                     const ad::Var<T>& factor) {
  check_pair(p, q);
  check_unit_rows(p, "P");
  check_unit_rows(q, "Q");
  const std::size_t n = p.rows();
  if (w.n != n || w.w.size() != n * n) fail(Errc::shape, "cwcl_loss: weights are {}x{}, batch is {}", w.n, w.n, n);
  std::vector<T> weights(n * n);
  std::vector<T> inv_row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights[i * n + j] = static_cast<T>(w.at(i, j));
      row += w.at(i, j);
    }
    if (!(row > 0.0)) fail(Errc::invalid_argument, "cwcl_loss: weight row {} sums to zero", i);
    inv_row[i] = static_cast<T>(1.0 / row);
  }
  const auto wt = ad::Var<T>::leaf({n, n}, std::move(weights));
  const auto norm = ad::Var<T>::leaf({n, 1}, std::move(inv_row));
  auto ls = ad::log_softmax_rows(similarity_logits(p, q, factor));
  auto per_row = ad::mul_col(ad::sum_rows(ad::mul(wt, ls)), norm);
  return ad::scale(ad::sum(per_row), -1.0 / static_cast<double>(n));
}

template <class T>
ad::Var<T> total_loss(const ad::Var<T>& p, const ad::Var<T>& q, const WeightMatrix& w,
                      const ad::Var<T>& factor) {
  return ad::add(cwcl_loss(p, q, w, factor), clip_loss_v2u(p, q, factor));
}

template <class T>
ad::Var<T> sigmoid_pair_loss(const ad::Var<T>& p, const ad::Var<T>& q, const ad::Var<T>& factor,
                             const ad::Var<T>& bias) {
  check_pair(p, q);
  const std::size_t n = p.rows();
  std::vector<T> sign(n * n, T(-1));
  for (std::size_t i = 0; i < n; ++i) sign[i * n + i] = T(1);
  auto logits = ad::add_scalar(similarity_logits(p, q, factor), bias);
  auto signed_logits = ad::mul(logits, ad::Var<T>::leaf({n, n}, std::move(sign)));
  return ad::scale(ad::sum(ad::log_sigmoid(signed_logits)), -1.0 / static_cast<double>(n));
}

#define CELLCLIP_INSTANTIATE(T)                                                                   \
  template class LogitScale<T>;                                                                   \
  template ad::Var<T> similarity_logits(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&); \
  template ad::Var<T> clip_loss_u2v(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);     \
  template ad::Var<T> clip_loss_v2u(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);     \
  template ad::Var<T> clip_loss(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);         \
  template ad::Var<T> cwcl_loss(const ad::Var<T>&, const ad::Var<T>&, const WeightMatrix&,        \
                                const ad::Var<T>&);                                               \
  template ad::Var<T> total_loss(const ad::Var<T>&, const ad::Var<T>&, const WeightMatrix&,       \
                                 const ad::Var<T>&);                                              \
  template ad::Var<T> sigmoid_pair_loss(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&,  \
                                        const ad::Var<T>&);

CELLCLIP_INSTANTIATE(float)
CELLCLIP_INSTANTIATE(double)

#undef CELLCLIP_INSTANTIATE

}  // namespace cellclip::loss
