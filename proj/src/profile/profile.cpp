#include "profile/profile.hpp"

#include <algorithm>
#include <cmath>

#include "profile/attention_pool.hpp"
#include "util/error.hpp"

namespace cellclip::profile {

ChannelProfile assemble_profile(std::string image_id,
                                std::span<const std::vector<float>> per_channel,
                                std::size_t expected_channels) {
  if (per_channel.size() != expected_channels) {
    fail(Errc::shape, "profile {}: expected {} channel embeddings, got {}", image_id,
         expected_channels, per_channel.size());
  }
  if (per_channel.empty()) fail(Errc::shape, "profile {}: no channels", image_id);
  const std::size_t d = per_channel[0].size();
  if (d == 0) fail(Errc::shape, "profile {}: zero-width channel embedding", image_id);
  ChannelProfile out{std::move(image_id), per_channel.size(), d, {}};
  out.values.reserve(out.channels * d);
  for (std::size_t c = 0; c < per_channel.size(); ++c) {
    if (per_channel[c].size() != d) {
      fail(Errc::shape, "profile {}: channel {} has width {}, expected {}", out.image_id, c,
           per_channel[c].size(), d);
    }
    for (float v : per_channel[c]) {
      if (!std::isfinite(v)) fail(Errc::numeric, "profile {}: non-finite value in channel {}", out.image_id, c);
      out.values.push_back(v);
    }
  }
  return out;
}

void check_bag(const InstanceBag& bag) {
  if (bag.instances.empty()) fail(Errc::invalid_argument, "bag {} is empty", bag.perturbation_id);
  const auto& first = bag.instances.front();
  for (const auto& inst : bag.instances) {
    if (inst.channels != first.channels || inst.dim != first.dim ||
        inst.values.size() != inst.channels * inst.dim) {
      fail(Errc::shape, "bag {}: instance {} is {}x{}, expected {}x{}", bag.perturbation_id,
           inst.image_id, inst.channels, inst.dim, first.channels, first.dim);
    }
  }
}

PooledProfile static_pool(const InstanceBag& bag, StaticPool method) {
  check_bag(bag);
  const std::size_t n = bag.size();
  const std::size_t width = bag.channels() * bag.dim();
  PooledProfile out{bag.perturbation_id, bag.channels(), bag.dim(),
                    std::vector<float>(width), std::nullopt};
  std::vector<float> column(n);
  for (std::size_t e = 0; e < width; ++e) {
    for (std::size_t k = 0; k < n; ++k) column[k] = bag.instances[k].values[e];
    if (method == StaticPool::mean) {
      double acc = 0.0;
      for (float v : column) acc += v;
      out.values[e] = static_cast<float>(acc / static_cast<double>(n));
    } else {
      // Sorting makes the result independent of instance order.
      std::sort(column.begin(), column.end());
      out.values[e] = n % 2 == 1 ? column[n / 2]
                                 : static_cast<float>((double(column[n / 2 - 1]) + column[n / 2]) / 2.0);
    }
  }
  return out;
}

PooledProfile gated_attention_pool(const InstanceBag& bag, const GatedAttentionParams& params) {
  check_bag(bag);
  GatedAttentionPool<float> pool(bag.channels(), params);
  auto result = pool.forward(bag);
  PooledProfile out{bag.perturbation_id, bag.channels(), bag.dim(),
                    std::vector<float>(result.pooled.value().begin(), result.pooled.value().end()),
                    std::nullopt};
  // Stored N×C.
  const std::size_t n = bag.size(), c = bag.channels();
  std::vector<float> attention(n * c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < n; ++k) attention[k * c + ch] = result.attention.at(ch, k);
  out.attention = std::move(attention);
  return out;
}

double cwcl_weight(const PooledProfile& a, const PooledProfile& b) {
  if (a.channels != b.channels || a.dim != b.dim) {
    fail(Errc::shape, "cwcl_weight: {}x{} vs {}x{}", a.channels, a.dim, b.channels, b.dim);
  }
  if (a.channels == 0) fail(Errc::shape, "cwcl_weight: profiles have no channels");
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    const auto x = a.channel(c);
    const auto y = b.channel(c);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t j = 0; j < a.dim; ++j) {
      dot += double(x[j]) * y[j];
      nx += double(x[j]) * x[j];
      ny += double(y[j]) * y[j];
    }
    if (nx == 0.0) fail(Errc::invalid_argument, "cwcl_weight: {} channel {} has zero norm", a.perturbation_id, c);
    if (ny == 0.0) fail(Errc::invalid_argument, "cwcl_weight: {} channel {} has zero norm", b.perturbation_id, c);
    // sqrt of the product keeps the expression symmetric in (a, b).
    total += dot / std::sqrt(nx * ny) / (2.0 * static_cast<double>(a.channels));
  }
  return std::clamp(total + 0.5, 0.0, 1.0);
}

}  // namespace cellclip::profile
