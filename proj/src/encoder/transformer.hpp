#pragma once

// Pre-LN transformer pieces shared by the image and text encoders.

#include <cstddef>
#include <vector>

#include "autodiff/params.hpp"

namespace cellclip::encoder {

template <class T>
struct Linear {
  ad::Var<T> weight;  // in×out
  ad::Var<T> bias;    // 1×out, may be undefined

  static Linear make(Rng& rng, std::size_t in, std::size_t out, bool with_bias = true);
  ad::Var<T> operator()(const ad::Var<T>& x) const;
  ad::ParamList<T> parameters() const;
};

template <class T>
struct LayerNorm {
  ad::Var<T> gain;
  ad::Var<T> bias;

  static LayerNorm make(std::size_t width);
  ad::Var<T> operator()(const ad::Var<T>& x) const;
  ad::ParamList<T> parameters() const;
};

template <class T>
struct EncoderBlock {
  LayerNorm<T> ln1;
  Linear<T> qkv;
  Linear<T> attn_out;
  LayerNorm<T> ln2;
  Linear<T> fc1;
  Linear<T> fc2;
  std::size_t heads = 1;

  static EncoderBlock make(Rng& rng, std::size_t width, std::size_t heads, std::size_t mlp_ratio);
  // x: T×width. x + MHSA(LN(x)), then + MLP(LN(.)).
  ad::Var<T> operator()(const ad::Var<T>& x) const;
  ad::ParamList<T> parameters() const;
};

template <class T>
ad::Var<T> multi_head_attention(const ad::Var<T>& x, const Linear<T>& qkv, const Linear<T>& out,
                                std::size_t heads);

template <class T>
struct TransformerStack {
  std::vector<EncoderBlock<T>> blocks;

  static TransformerStack make(Rng& rng, std::size_t layers, std::size_t width, std::size_t heads,
                               std::size_t mlp_ratio);
  ad::Var<T> operator()(ad::Var<T> x) const;
  ad::ParamList<T> parameters() const;
};

}  // namespace cellclip::encoder
