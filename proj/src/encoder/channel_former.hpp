#pragma once

// Image-side encoder: one token per channel plus a CLS token.

#include <cstddef>

#include "encoder/transformer.hpp"

namespace cellclip::encoder {

struct EncoderConfig {
  std::size_t channels = 5;
  std::size_t input_dim = 32;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t output_dim = 64;

  // Throws unless all sizes are positive (layers may be 0) and width % heads == 0.
  void validate() const;
};

template <class T>
class ChannelFormer {
 public:
  ChannelFormer() = default;
  ChannelFormer(const EncoderConfig& config, Rng& rng);

  // [cls, proj(mu^1) + chn^1, ..., proj(mu^C) + chn^C] for a C×d pooled profile.
  ad::Var<T> token_sequence(const ad::Var<T>& pooled) const;
  // 1×output_dim, unit norm.
  ad::Var<T> encode(const ad::Var<T>& pooled) const;

  ad::ParamList<T> parameters() const;
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  Linear<T> input_proj_;
  ad::Var<T> cls_;  // 1×width
  ad::Var<T> chn_;  // C×width
  TransformerStack<T> stack_;
  LayerNorm<T> final_ln_;
  Linear<T> head_;
};

}  // namespace cellclip::encoder
