#pragma once

// The full two-tower model: bag pooling, channel-token image encoder,
// prompt encoder and the trainable loss scalars.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "encoder/channel_former.hpp"
#include "loss/contrastive.hpp"
#include "profile/attention_pool.hpp"
#include "text/text_encoder.hpp"
#include "text/tokenizer.hpp"
#include "train/config.hpp"

namespace cellclip::train {

// One training pair: a bag of image profiles and the perturbation prompt.
struct Example {
  std::string id;
  profile::InstanceBag bag;
  std::string prompt;
};

template <class T>
class CellClipModel {
 public:
  struct Pooled {
    ad::Var<T> tensor;  // C×d, carries gradient for attention pooling
    profile::PooledProfile plain;
  };

  CellClipModel() = default;
  // Components are initialized from independent streams keyed by seed.
  CellClipModel(const ModelConfig& config, text::Vocabulary vocab, std::uint64_t seed);

  Pooled pool(const profile::InstanceBag& bag) const;
  ad::Var<T> image_latent(const ad::Var<T>& pooled) const;
  ad::Var<T> text_latent(const std::string& prompt) const;

  // Scalar loss of one batch of aligned pairs.
  ad::Var<T> batch_loss(std::span<const Example* const> batch) const;

  // Inference helpers: unit-norm latent vectors.
  std::vector<float> embed_bag(const profile::InstanceBag& bag) const;
  std::vector<float> embed_prompt(const std::string& prompt) const;

  // Stable order: pool., image., text., logit.theta, then sigmoid.bias when
  // the sigmoid loss is selected.
  ad::ParamList<T> parameters() const;
  // Re-applies constraints after an optimizer step.
  void constrain();

  const ModelConfig& config() const { return config_; }
  const text::Vocabulary& vocabulary() const { return vocab_; }
  double logit_scale() const { return logit_.value(); }

 private:
  ModelConfig config_;
  text::Vocabulary vocab_;
  std::optional<profile::GatedAttentionPool<T>> attention_;
  encoder::ChannelFormer<T> image_;
  text::TextEncoder<T> text_;
  loss::LogitScale<T> logit_;
  ad::Var<T> sigmoid_bias_;
};

}  // namespace cellclip::train
