#include "encoder/transformer.hpp"

#include <cmath>

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::encoder {

template <class T>
Linear<T> Linear<T>::make(Rng& rng, std::size_t in, std::size_t out, bool with_bias) {
  Linear l;
  // Fan-in scaled (variance 1/(3 in)). A flat 0.02 leaves attention scores
  // near zero and desk-scale training stalls.
  l.weight = ad::init_trunc_normal<T>(rng, {in, out}, 1.0 / std::sqrt(3.0 * static_cast<double>(in)));
  if (with_bias) l.bias = ad::init_constant<T>({1, out}, 0.0);
  return l;
}

template <class T>
ad::Var<T> Linear<T>::operator()(const ad::Var<T>& x) const {
  auto y = ad::matmul(x, weight);
  return bias.defined() ? ad::add_row(y, bias) : y;
}

template <class T>
ad::ParamList<T> Linear<T>::parameters() const {
  ad::ParamList<T> out{{"weight", weight, true}};
  if (bias.defined()) out.push_back({"bias", bias, false});
  return out;
}

template <class T>
LayerNorm<T> LayerNorm<T>::make(std::size_t width) {
  return {ad::init_constant<T>({1, width}, 1.0), ad::init_constant<T>({1, width}, 0.0)};
}

template <class T>
ad::Var<T> LayerNorm<T>::operator()(const ad::Var<T>& x) const {
  return ad::layer_norm(x, gain, bias);
}

template <class T>
ad::ParamList<T> LayerNorm<T>::parameters() const {
  return {{"gain", gain, false}, {"bias", bias, false}};
}

template <class T>
ad::Var<T> multi_head_attention(const ad::Var<T>& x, const Linear<T>& qkv, const Linear<T>& out,
                                std::size_t heads) {
  const std::size_t width = x.cols();
  const std::size_t head_dim = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const auto proj = qkv(x);
  std::vector<ad::Var<T>> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto q = ad::slice_cols(proj, h * head_dim, head_dim);
    auto k = ad::slice_cols(proj, width + h * head_dim, head_dim);
    auto v = ad::slice_cols(proj, 2 * width + h * head_dim, head_dim);
    auto attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt));
    per_head.push_back(ad::matmul(attn, v));
  }
  return out(heads == 1 ? per_head[0] : ad::concat_cols<T>(per_head));
}

template <class T>
EncoderBlock<T> EncoderBlock<T>::make(Rng& rng, std::size_t width, std::size_t heads,
                                      std::size_t mlp_ratio) {
  if (heads == 0 || width % heads != 0) {
    fail(Errc::invalid_argument, "width {} is not divisible by {} heads", width, heads);
  }
  EncoderBlock b;
  b.ln1 = LayerNorm<T>::make(width);
  b.qkv = Linear<T>::make(rng, width, 3 * width);
  b.attn_out = Linear<T>::make(rng, width, width);
  b.ln2 = LayerNorm<T>::make(width);
  b.fc1 = Linear<T>::make(rng, width, mlp_ratio * width);
  b.fc2 = Linear<T>::make(rng, mlp_ratio * width, width);
  b.heads = heads;
  return b;
}

template <class T>
ad::Var<T> EncoderBlock<T>::operator()(const ad::Var<T>& x) const {
  auto h = ad::add(x, multi_head_attention(ln1(x), qkv, attn_out, heads));
  return ad::add(h, fc2(ad::gelu(fc1(ln2(h)))));
}

template <class T>
ad::ParamList<T> EncoderBlock<T>::parameters() const {
  ad::ParamList<T> out;
  ad::append(out, "ln1.", ln1.parameters());
  ad::append(out, "attn.qkv.", qkv.parameters());
  ad::append(out, "attn.out.", attn_out.parameters());
  ad::append(out, "ln2.", ln2.parameters());
  ad::append(out, "mlp.fc1.", fc1.parameters());
  ad::append(out, "mlp.fc2.", fc2.parameters());
  return out;
}

template <class T>
TransformerStack<T> TransformerStack<T>::make(Rng& rng, std::size_t layers, std::size_t width,
                                              std::size_t heads, std::size_t mlp_ratio) {
  TransformerStack s;
  for (std::size_t i = 0; i < layers; ++i)
    s.blocks.push_back(EncoderBlock<T>::make(rng, width, heads, mlp_ratio));
  return s;
}

template <class T>
ad::Var<T> TransformerStack<T>::operator()(ad::Var<T> x) const {
  for (const auto& b : blocks) x = b(x);
  return x;
}

template <class T>
ad::ParamList<T> TransformerStack<T>::parameters() const {
  ad::ParamList<T> out;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    ad::append(out, "blocks." + std::to_string(i) + ".", blocks[i].parameters());
  return out;
}

template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct EncoderBlock<float>;
template struct EncoderBlock<double>;
template struct TransformerStack<float>;
template struct TransformerStack<double>;
template ad::Var<float> multi_head_attention(const ad::Var<float>&, const Linear<float>&,
                                             const Linear<float>&, std::size_t);
template ad::Var<double> multi_head_attention(const ad::Var<double>&, const Linear<double>&,
                                              const Linear<double>&, std::size_t);

}  // namespace cellclip::encoder
