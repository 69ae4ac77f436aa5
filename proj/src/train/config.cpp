#include "train/config.hpp"

#include <cmath>
#include <numbers>

#include "text/prompt.hpp"
#include "util/error.hpp"

namespace cellclip::train {

PoolKind parse_pool(std::string_view s) {
  if (s == "attention") return PoolKind::attention;
  if (s == "mean") return PoolKind::mean;
  if (s == "median") return PoolKind::median;
  fail(Errc::invalid_argument, "unknown pooling '{}' (attention, mean, median)", s);
}

std::string_view pool_name(PoolKind p) {
  switch (p) {
    case PoolKind::attention: return "attention";
    case PoolKind::mean: return "mean";
    case PoolKind::median: return "median";
  }
  return "attention";
}

LossKind parse_loss(std::string_view s) {
  if (s == "total" || s == "cwcl") return LossKind::total;
  if (s == "clip") return LossKind::clip;
  if (s == "sigmoid") return LossKind::sigmoid;
  fail(Errc::invalid_argument, "unknown loss '{}' (total, clip, sigmoid)", s);
}

std::string_view loss_name(LossKind l) {
  switch (l) {
    case LossKind::total: return "total";
    case LossKind::clip: return "clip";
    case LossKind::sigmoid: return "sigmoid";
  }
  return "total";
}

void ModelConfig::validate() const {
  image.validate();
  if (attention_hidden == 0) fail(Errc::invalid_argument, "model.attention_hidden must be positive");
  if (text_width == 0 || text_heads == 0 || text_width % text_heads != 0) {
    fail(Errc::invalid_argument, "model.text_width {} must be a positive multiple of model.text_heads {}", text_width, text_heads);
  }
  if (text_mlp_ratio == 0 || text_max_len == 0) fail(Errc::invalid_argument, "text sizes must be positive");
  if (!(logit_scale > 0.0 && logit_scale <= loss::kMaxLogitScale)) {
    fail(Errc::invalid_argument, "model.logit_scale must lie in (0, {}]", loss::kMaxLogitScale);
  }
  text::resolve_template(prompt_template);
}

KvList ModelConfig::entries() const {
  return {
      {"pool", std::string(pool_name(pool))},
      {"attention_hidden", std::to_string(attention_hidden)},
      {"attention_per_channel", attention_per_channel ? "true" : "false"},
      {"channels", std::to_string(image.channels)},
      {"input_dim", std::to_string(image.input_dim)},
      {"width", std::to_string(image.width)},
      {"layers", std::to_string(image.layers)},
      {"heads", std::to_string(image.heads)},
      {"mlp_ratio", std::to_string(image.mlp_ratio)},
      {"output_dim", std::to_string(image.output_dim)},
      {"text_width", std::to_string(text_width)},
      {"text_layers", std::to_string(text_layers)},
      {"text_heads", std::to_string(text_heads)},
      {"text_mlp_ratio", std::to_string(text_mlp_ratio)},
      {"text_max_len", std::to_string(text_max_len)},
      {"loss", std::string(loss_name(loss))},
      {"logit_scale", format_double(logit_scale)},
      {"scale_mode", scale_mode == loss::ScaleMode::multiplier ? "multiplier" : "divisor"},
      {"sigmoid_bias", format_double(sigmoid_bias)},
      {"template", prompt_template},
  };
}

bool ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "pool") pool = parse_pool(value);
  else if (key == "attention_hidden") attention_hidden = parse_size(key, value);
  else if (key == "attention_per_channel") attention_per_channel = parse_bool(key, value);
  else if (key == "channels") image.channels = parse_size(key, value);
  else if (key == "input_dim") image.input_dim = parse_size(key, value);
  else if (key == "width") image.width = parse_size(key, value);
  else if (key == "layers") image.layers = parse_size(key, value);
  else if (key == "heads") image.heads = parse_size(key, value);
  else if (key == "mlp_ratio") image.mlp_ratio = parse_size(key, value);
  else if (key == "output_dim") image.output_dim = parse_size(key, value);
  else if (key == "text_width") text_width = parse_size(key, value);
  else if (key == "text_layers") text_layers = parse_size(key, value);
  else if (key == "text_heads") text_heads = parse_size(key, value);
  else if (key == "text_mlp_ratio") text_mlp_ratio = parse_size(key, value);
  else if (key == "text_max_len") text_max_len = parse_size(key, value);
  else if (key == "loss") loss = parse_loss(value);
  else if (key == "logit_scale") logit_scale = parse_double(key, value);
  else if (key == "scale_mode") {
    if (value == "multiplier") scale_mode = loss::ScaleMode::multiplier;
    else if (value == "divisor") scale_mode = loss::ScaleMode::divisor;
    else fail(Errc::invalid_argument, "model.scale_mode must be multiplier or divisor, got '{}'", value);
  } else if (key == "sigmoid_bias") sigmoid_bias = parse_double(key, value);
  else if (key == "template") prompt_template = std::string(value);
  else return false;
  return true;
}

void TrainConfig::validate() const {
  if (epochs == 0) fail(Errc::invalid_argument, "train.epochs must be positive");
  if (batch_size == 0) fail(Errc::invalid_argument, "train.batch_size must be positive");
  if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max) {
    fail(Errc::invalid_argument, "learning rates need 0 <= lr_min <= lr_max and lr_max > 0");
  }
  if (restarts == 0) fail(Errc::invalid_argument, "train.restarts must be at least 1");
  if (weight_decay < 0.0) fail(Errc::invalid_argument, "train.weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail(Errc::invalid_argument, "betas must lie in [0, 1)");
  if (!(eps > 0.0)) fail(Errc::invalid_argument, "train.eps must be positive");
  if (recall_ks.empty()) fail(Errc::invalid_argument, "train.recall_ks must list at least one k");
  for (auto k : recall_ks)
    if (k == 0) fail(Errc::invalid_argument, "train.recall_ks entries must be positive");
}

KvList TrainConfig::entries() const {
  std::string ks;
  for (std::size_t i = 0; i < recall_ks.size(); ++i) ks += (i ? "," : "") + std::to_string(recall_ks[i]);
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"lr_max", format_double(lr_max)},
      {"lr_min", format_double(lr_min)},
      {"warmup_steps", std::to_string(warmup_steps)},
      {"restarts", std::to_string(restarts)},
      {"weight_decay", format_double(weight_decay)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"eps", format_double(eps)},
      {"seed", std::to_string(seed)},
      {"recall_ks", ks},
  };
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "epochs") epochs = parse_size(key, value);
  else if (key == "batch_size") batch_size = parse_size(key, value);
  else if (key == "lr_max") lr_max = parse_double(key, value);
  else if (key == "lr_min") lr_min = parse_double(key, value);
  else if (key == "warmup_steps") warmup_steps = parse_size(key, value);
  else if (key == "restarts") restarts = parse_size(key, value);
  else if (key == "weight_decay") weight_decay = parse_double(key, value);
  else if (key == "beta1") beta1 = parse_double(key, value);
  else if (key == "beta2") beta2 = parse_double(key, value);
  else if (key == "eps") eps = parse_double(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "recall_ks") {
    recall_ks.clear();
    std::string_view rest = value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      recall_ks.push_back(parse_size(key, trim(rest.substr(0, comma))));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  } else return false;
  return true;
}

double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& config) {
  const double hi = config.lr_max, lo = config.lr_min;
  const std::size_t warm = config.warmup_steps;
  if (step < warm) return hi * static_cast<double>(step + 1) / static_cast<double>(warm);
  if (step >= total_steps) return lo;
  const std::size_t remaining = total_steps - warm;
  const std::size_t cycles = std::max<std::size_t>(1, std::min(config.restarts, remaining));
  const std::size_t length = remaining / cycles;
  const std::size_t t0 = step - warm;
  const std::size_t cycle = std::min(t0 / length, cycles - 1);
  const std::size_t t = t0 - cycle * length;
  const std::size_t span = cycle == cycles - 1 ? remaining - cycle * length : length;
  if (span <= 1) return hi;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(span - 1);
  return lo + 0.5 * (hi - lo) * (1.0 + std::cos(phase));
}

}  // namespace cellclip::train
