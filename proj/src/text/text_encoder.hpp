#pragma once

#include <cstddef>

#include "encoder/transformer.hpp"
#include "text/tokenizer.hpp"

namespace cellclip::text {

struct TextEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t output_dim = 64;

  void validate() const;
};

// Small trainable pre-LN text transformer with learned positions and a CLS
// readout. Only the real (unmasked) prefix of a sequence is run, so padding
// has no effect on the output.
template <class T>
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& config, Rng& rng);

  // 1×output_dim, unit norm.
  ad::Var<T> encode(const TokenSequence& tokens) const;

  ad::ParamList<T> parameters() const;
  const TextEncoderConfig& config() const { return config_; }

 private:
  TextEncoderConfig config_;
  ad::Var<T> token_embedding_;     // vocab×width
  ad::Var<T> position_embedding_;  // max_len×width
  encoder::TransformerStack<T> stack_;
  encoder::LayerNorm<T> final_ln_;
  encoder::Linear<T> head_;
};

}  // namespace cellclip::text
