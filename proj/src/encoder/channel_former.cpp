#include "encoder/channel_former.hpp"

#include <array>

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::encoder {

void EncoderConfig::validate() const {
  if (channels == 0 || input_dim == 0 || width == 0 || heads == 0 || mlp_ratio == 0 ||
      output_dim == 0) {
    fail(Errc::invalid_argument, "encoder sizes must be positive");
  }
  if (width % heads != 0) fail(Errc::invalid_argument, "width {} is not divisible by {} heads", width, heads);
}

template <class T>
ChannelFormer<T>::ChannelFormer(const EncoderConfig& config, Rng& rng) : config_(config) {
  config.validate();
  input_proj_ = Linear<T>::make(rng, config.input_dim, config.width);
  cls_ = ad::init_trunc_normal<T>(rng, {1, config.width}, 0.02);
  chn_ = ad::init_trunc_normal<T>(rng, {config.channels, config.width}, 0.02);
  stack_ = TransformerStack<T>::make(rng, config.layers, config.width, config.heads, config.mlp_ratio);
  final_ln_ = LayerNorm<T>::make(config.width);
  head_ = Linear<T>::make(rng, config.width, config.output_dim, false);
}

template <class T>
ad::Var<T> ChannelFormer<T>::token_sequence(const ad::Var<T>& pooled) const {
  if (pooled.rows() != config_.channels || pooled.cols() != config_.input_dim) {
    fail(Errc::shape, "encoder expects a {}x{} pooled profile, got {}x{}", config_.channels,
         config_.input_dim, pooled.rows(), pooled.cols());
  }
  const std::array<ad::Var<T>, 2> parts{cls_, ad::add(input_proj_(pooled), chn_)};
  return ad::concat_rows<T>(parts);
}

template <class T>
ad::Var<T> ChannelFormer<T>::encode(const ad::Var<T>& pooled) const {
  auto tokens = stack_(token_sequence(pooled));
  auto cls = ad::slice_rows(tokens, 0, 1);
  return ad::l2_normalize_rows(head_(final_ln_(cls)));
}

template <class T>
ad::ParamList<T> ChannelFormer<T>::parameters() const {
  ad::ParamList<T> out;
  ad::append(out, "proj.", input_proj_.parameters());
  out.push_back({"cls", cls_, false});
  out.push_back({"chn", chn_, false});
  ad::append(out, "", stack_.parameters());
  ad::append(out, "final_ln.", final_ln_.parameters());
  ad::append(out, "head.", head_.parameters());
  return out;
}

template class ChannelFormer<float>;
template class ChannelFormer<double>;

}  // namespace cellclip::encoder
