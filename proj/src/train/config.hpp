#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "encoder/channel_former.hpp"
#include "loss/contrastive.hpp"
#include "util/kv.hpp"

namespace cellclip::train {

enum class PoolKind { attention, mean, median };
enum class LossKind { total, clip, sigmoid };

PoolKind parse_pool(std::string_view s);
std::string_view pool_name(PoolKind p);
LossKind parse_loss(std::string_view s);
std::string_view loss_name(LossKind l);

struct ModelConfig {
  PoolKind pool = PoolKind::attention;
  std::size_t attention_hidden = 128;
  bool attention_per_channel = false;
  encoder::EncoderConfig image;  // output_dim is shared with the text side
  std::size_t text_width = 64;
  std::size_t text_layers = 2;
  std::size_t text_heads = 4;
  std::size_t text_mlp_ratio = 4;
  std::size_t text_max_len = 128;
  LossKind loss = LossKind::total;
  double logit_scale = loss::kDefaultLogitScale;
  loss::ScaleMode scale_mode = loss::ScaleMode::multiplier;
  double sigmoid_bias = loss::kDefaultSigmoidBias;
  std::string prompt_template = "main";

  void validate() const;
  // Keys without a prefix, in a fixed order.
  KvList entries() const;
  // Returns false for an unknown key; throws on a malformed value.
  bool set(std::string_view key, std::string_view value);
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 512;
  double lr_max = 2e-4;
  double lr_min = 0.0;
  std::size_t warmup_steps = 200;
  std::size_t restarts = 1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::vector<std::size_t> recall_ks{1, 5, 10};

  void validate() const;
  KvList entries() const;
  bool set(std::string_view key, std::string_view value);
};

// Linear warmup to lr_max over warmup_steps (step + 1 / warmup), then
// `restarts` cosine cycles from lr_max down to lr_min over the remaining
// steps. The last cycle absorbs any remainder.
double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& config);

}  // namespace cellclip::train
