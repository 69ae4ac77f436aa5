#include "train/model.hpp"

#include "autodiff/ops.hpp"
#include "util/error.hpp"

namespace cellclip::train {

namespace {

text::TextEncoderConfig text_config(const ModelConfig& c, std::size_t vocab_size) {
  text::TextEncoderConfig t;
  t.vocab_size = vocab_size;
  t.width = c.text_width;
  t.layers = c.text_layers;
  t.heads = c.text_heads;
  t.mlp_ratio = c.text_mlp_ratio;
  t.max_len = c.text_max_len;
  t.output_dim = c.image.output_dim;
  return t;
}

}  // namespace

template <class T>
CellClipModel<T>::CellClipModel(const ModelConfig& config, text::Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  if (config_.pool == PoolKind::attention) {
    Rng rng = Rng::keyed({seed, 1});
    attention_.emplace(config_.image.channels, config_.image.input_dim,
                       profile::AttentionPoolConfig{config_.attention_hidden, config_.attention_per_channel}, rng);
  }
  Rng image_rng = Rng::keyed({seed, 2});
  image_ = encoder::ChannelFormer<T>(config_.image, image_rng);
  Rng text_rng = Rng::keyed({seed, 3});
  text_ = text::TextEncoder<T>(text_config(config_, vocab_.size()), text_rng);
  logit_ = loss::LogitScale<T>(config_.logit_scale, config_.scale_mode);
  sigmoid_bias_ = ad::Var<T>::scalar(static_cast<T>(config_.sigmoid_bias), true);
}

template <class T>
typename CellClipModel<T>::Pooled CellClipModel<T>::pool(const profile::InstanceBag& bag) const {
  profile::check_bag(bag);
  if (bag.channels() != config_.image.channels || bag.dim() != config_.image.input_dim) {
    fail(Errc::shape, "bag '{}' is {}x{} per image, model expects {}x{}", bag.perturbation_id, bag.channels(),
         bag.dim(), config_.image.channels, config_.image.input_dim);
  }
  Pooled out;
  if (attention_) {
    out.tensor = attention_->forward(bag).pooled;
    out.plain.perturbation_id = bag.perturbation_id;
    out.plain.channels = bag.channels();
    out.plain.dim = bag.dim();
    const auto v = out.tensor.value();
    out.plain.values.assign(v.begin(), v.end());
  } else {
    out.plain = profile::static_pool(bag, config_.pool == PoolKind::mean ? profile::StaticPool::mean
                                                                         : profile::StaticPool::median);
    std::vector<T> v(out.plain.values.begin(), out.plain.values.end());
    out.tensor = ad::Var<T>::leaf({out.plain.channels, out.plain.dim}, std::move(v));
  }
  return out;
}

template <class T>
ad::Var<T> CellClipModel<T>::image_latent(const ad::Var<T>& pooled) const {
  return image_.encode(pooled);
}

template <class T>
ad::Var<T> CellClipModel<T>::text_latent(const std::string& prompt) const {
  return text_.encode(text::tokenize(prompt, vocab_, config_.text_max_len));
}

template <class T>
ad::Var<T> CellClipModel<T>::batch_loss(std::span<const Example* const> batch) const {
  if (batch.empty()) fail(Errc::invalid_argument, "empty batch");
  std::vector<ad::Var<T>> images, texts;
  std::vector<profile::PooledProfile> plain;
  for (const Example* ex : batch) {
    auto pooled = pool(ex->bag);
    images.push_back(image_latent(pooled.tensor));
    texts.push_back(text_latent(ex->prompt));
    plain.push_back(std::move(pooled.plain));
  }
  const auto p = ad::concat_rows<T>(images);
  const auto q = ad::concat_rows<T>(texts);
  const auto factor = logit_.factor();
  switch (config_.loss) {
    case LossKind::total: return loss::total_loss(p, q, loss::cwcl_weights(plain), factor);
    case LossKind::clip: return loss::clip_loss(p, q, factor);
    case LossKind::sigmoid: return loss::sigmoid_pair_loss(p, q, factor, sigmoid_bias_);
  }
  fail(Errc::state, "unknown loss kind");
}

template <class T>
std::vector<float> CellClipModel<T>::embed_bag(const profile::InstanceBag& bag) const {
  const auto z = image_latent(pool(bag).tensor);
  return {z.value().begin(), z.value().end()};
}

template <class T>
std::vector<float> CellClipModel<T>::embed_prompt(const std::string& prompt) const {
  const auto z = text_latent(prompt);
  return {z.value().begin(), z.value().end()};
}

template <class T>
ad::ParamList<T> CellClipModel<T>::parameters() const {
  ad::ParamList<T> out;
  if (attention_) ad::append(out, "pool.", attention_->parameters());
  ad::append(out, "image.", image_.parameters());
  ad::append(out, "text.", text_.parameters());
  auto theta = logit_.parameter();
  theta.name = "logit.theta";
  out.push_back(theta);
  if (config_.loss == LossKind::sigmoid) out.push_back({"sigmoid.bias", sigmoid_bias_, false});
  return out;
}

template <class T>
void CellClipModel<T>::constrain() {
  logit_.clamp();
}

template class CellClipModel<float>;
template class CellClipModel<double>;

}  // namespace cellclip::train
