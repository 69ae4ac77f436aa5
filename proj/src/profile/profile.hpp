#pragma once

// Per-image channel profiles and per-perturbation pooling.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cellclip::profile {

// One image: C per-channel embeddings of width d, stored C×d row-major in the
// dataset's declared channel order.
struct ChannelProfile {
  std::string image_id;
  std::size_t channels = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> channel(std::size_t c) const {
    return std::span(values).subspan(c * dim, dim);
  }
};

// Stacks per-channel vectors in the order given. Throws if the count differs
// from expected_channels, widths disagree, or any value is non-finite.
ChannelProfile assemble_profile(std::string image_id,
                                std::span<const std::vector<float>> per_channel,
                                std::size_t expected_channels);

// All images of one perturbation (or one perturbation within one batch).
struct InstanceBag {
  std::string perturbation_id;
  std::vector<ChannelProfile> instances;

  std::size_t size() const { return instances.size(); }
  std::size_t channels() const { return instances.at(0).channels; }
  std::size_t dim() const { return instances.at(0).dim; }
};

// Throws on an empty bag or instances with mismatched C or d.
void check_bag(const InstanceBag& bag);

struct PooledProfile {
  std::string perturbation_id;
  std::size_t channels = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // C×d
  // N×C attention weights when produced by gated attention.
  std::optional<std::vector<float>> attention;

  std::span<const float> channel(std::size_t c) const {
    return std::span(values).subspan(c * dim, dim);
  }
};

enum class StaticPool { mean, median };

PooledProfile static_pool(const InstanceBag& bag, StaticPool method);

// Gated attention parameters shared by all channels: w (L), V and U (L×d),
// row-major.
struct GatedAttentionParams {
  std::size_t hidden = 0;
  std::size_t dim = 0;
  std::vector<float> w;
  std::vector<float> V;
  std::vector<float> U;
};

// Channel-wise convex combination with weights
// softmax_k(w · (tanh(V z_k^c) ⊙ sigmoid(U z_k^c))).
PooledProfile gated_attention_pool(const InstanceBag& bag, const GatedAttentionParams& params);

// Mean channel-wise cosine mapped to [0, 1]:
// sum_c cos(a^c, b^c) / (2C) + 0.5. Throws on a zero-norm channel row.
double cwcl_weight(const PooledProfile& a, const PooledProfile& b);

}  // namespace cellclip::profile
