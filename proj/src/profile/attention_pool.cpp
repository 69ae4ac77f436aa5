#include "profile/attention_pool.hpp"

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::profile {

template <class T>
ad::Var<T> bag_tensor(const InstanceBag& bag) {
  check_bag(bag);
  const std::size_t n = bag.size(), c = bag.channels(), d = bag.dim();
  std::vector<T> values(c * n * d);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < d; ++j)
        values[(ch * n + k) * d + j] = static_cast<T>(bag.instances[k].values[ch * d + j]);
  return ad::Var<T>::leaf({c * n, d}, std::move(values), false);
}

template <class T>
GatedAttentionPool<T>::GatedAttentionPool(std::size_t channels, std::size_t dim,
                                          AttentionPoolConfig config, Rng& rng)
    : channels_(channels), dim_(dim), config_(config) {
  if (channels == 0 || dim == 0 || config.hidden == 0) {
    fail(Errc::invalid_argument, "attention pool needs positive channels, dim and hidden width");
  }
  const std::size_t sets = config.per_channel ? channels : 1;
  for (std::size_t s = 0; s < sets; ++s) {
    Gate g;
    g.V = ad::init_trunc_normal<T>(rng, {config.hidden, dim}, 0.02);
    g.U = ad::init_trunc_normal<T>(rng, {config.hidden, dim}, 0.02);
    g.w = ad::init_trunc_normal<T>(rng, {config.hidden, 1}, 0.02);
    gates_.push_back(std::move(g));
  }
}

template <class T>
GatedAttentionPool<T>::GatedAttentionPool(std::size_t channels, const GatedAttentionParams& p)
    : channels_(channels), dim_(p.dim), config_{p.hidden, false} {
  const std::size_t l = p.hidden, d = p.dim;
  if (l == 0 || d == 0 || p.w.size() != l || p.V.size() != l * d || p.U.size() != l * d) {
    fail(Errc::shape, "gated attention params: w must be {}, V and U {}x{}", l, l, d);
  }
  auto as_t = [](const std::vector<float>& v) { return std::vector<T>(v.begin(), v.end()); };
  gates_.push_back(Gate{ad::Var<T>::leaf({l, d}, as_t(p.V)), ad::Var<T>::leaf({l, d}, as_t(p.U)),
                        ad::Var<T>::leaf({l, 1}, as_t(p.w))});
}

template <class T>
ad::Var<T> GatedAttentionPool<T>::scores(const Gate& g, const ad::Var<T>& z) const {
  auto gate = ad::mul(ad::tanh(ad::matmul(z, ad::transpose(g.V))),
                      ad::sigmoid(ad::matmul(z, ad::transpose(g.U))));
  return ad::matmul(gate, g.w);
}

template <class T>
typename GatedAttentionPool<T>::Output GatedAttentionPool<T>::forward(const InstanceBag& bag) const {
  check_bag(bag);
  if (bag.channels() != channels_ || bag.dim() != dim_) {
    fail(Errc::shape, "attention pool expects {}x{} profiles, bag {} has {}x{}", channels_, dim_,
         bag.perturbation_id, bag.channels(), bag.dim());
  }
  const std::size_t n = bag.size();
  const auto z = bag_tensor<T>(bag);
  ad::Var<T> logits;
  if (gates_.size() == 1) {
    logits = ad::reshape(scores(gates_[0], z), {channels_, n});
  } else {
    std::vector<ad::Var<T>> rows;
    for (std::size_t c = 0; c < channels_; ++c)
      rows.push_back(ad::transpose(scores(gates_[c], ad::slice_rows(z, c * n, n))));
    logits = ad::concat_rows<T>(rows);
  }
  auto alpha = ad::softmax_rows(logits);
  std::vector<ad::Var<T>> pooled;
  pooled.reserve(channels_);
  for (std::size_t c = 0; c < channels_; ++c)
    pooled.push_back(ad::matmul(ad::slice_rows(alpha, c, 1), ad::slice_rows(z, c * n, n)));
  return {ad::concat_rows<T>(pooled), alpha};
}

template <class T>
ad::ParamList<T> GatedAttentionPool<T>::parameters() const {
  ad::ParamList<T> out;
  for (std::size_t s = 0; s < gates_.size(); ++s) {
    const std::string prefix = gates_.size() == 1 ? "" : "c" + std::to_string(s) + ".";
    out.push_back({prefix + "V", gates_[s].V});
    out.push_back({prefix + "U", gates_[s].U});
    out.push_back({prefix + "w", gates_[s].w});
  }
  return out;
}

template class GatedAttentionPool<float>;
template class GatedAttentionPool<double>;
template ad::Var<float> bag_tensor<float>(const InstanceBag&);
template ad::Var<double> bag_tensor<double>(const InstanceBag&);

}  // namespace cellclip::profile
