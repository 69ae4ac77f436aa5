#include "text/text_encoder.hpp"

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::text {

void TextEncoderConfig::validate() const {
  if (vocab_size < 3 || width == 0 || heads == 0 || mlp_ratio == 0 || max_len == 0 || output_dim == 0) {
    fail(Errc::invalid_argument, "text encoder sizes must be positive (vocab includes 3 specials)");
  }
  if (width % heads != 0) fail(Errc::invalid_argument, "width {} is not divisible by {} heads", width, heads);
}

template <class T>
TextEncoder<T>::TextEncoder(const TextEncoderConfig& config, Rng& rng) : config_(config) {
  config.validate();
  token_embedding_ = ad::init_trunc_normal<T>(rng, {config.vocab_size, config.width}, 0.02);
  position_embedding_ = ad::init_trunc_normal<T>(rng, {config.max_len, config.width}, 0.02);
  stack_ = encoder::TransformerStack<T>::make(rng, config.layers, config.width, config.heads, config.mlp_ratio);
  final_ln_ = encoder::LayerNorm<T>::make(config.width);
  head_ = encoder::Linear<T>::make(rng, config.width, config.output_dim, false);
}

template <class T>
ad::Var<T> TextEncoder<T>::encode(const TokenSequence& tokens) const {
  const std::size_t len = tokens.length();
  if (len == 0 || tokens.ids.size() > config_.max_len || tokens.mask.size() != tokens.ids.size()) {
    fail(Errc::invalid_argument, "token sequence must hold 1..{} tokens", config_.max_len);
  }
  for (std::size_t i = 0; i < len; ++i) {
    if (!tokens.mask[i]) fail(Errc::invalid_argument, "real tokens must form a prefix of the sequence");
  }
  for (std::size_t i = 0; i < len; ++i) {
    if (tokens.ids[i] >= config_.vocab_size) {
      fail(Errc::invalid_argument, "token id {} outside vocabulary of {}", tokens.ids[i], config_.vocab_size);
    }
  }
  auto x = ad::add(ad::gather_rows(token_embedding_, std::span(tokens.ids).first(len)),
                   ad::slice_rows(position_embedding_, 0, len));
  auto cls = ad::slice_rows(stack_(x), 0, 1);
  return ad::l2_normalize_rows(head_(final_ln_(cls)));
}

template <class T>
ad::ParamList<T> TextEncoder<T>::parameters() const {
  ad::ParamList<T> out;
  out.push_back({"token_embedding", token_embedding_, false});
  out.push_back({"position_embedding", position_embedding_, false});
  ad::append(out, "", stack_.parameters());
  ad::append(out, "final_ln.", final_ln_.parameters());
  ad::append(out, "head.", head_.parameters());
  return out;
}

template class TextEncoder<float>;
template class TextEncoder<double>;

}  // namespace cellclip::text
