#include "harness/synth.hpp"

#include <algorithm>
#include <cmath>

#include "util/error.hpp"
#include "util/rng.hpp"

namespace cellclip::harness {

namespace {

constexpr std::string_view kClusterAtoms = "CNOSPFIB";
constexpr std::string_view kModifierAtoms = "12345678";
const std::vector<std::string> kChannelNames{"DNA", "ER", "RNA", "AGP", "Mito"};

// Entries scaled so the expected squared norm of a C×d block is C.
std::vector<double> gaussian_block(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

std::string channel_name(std::size_t c) {
  return c < kChannelNames.size() ? kChannelNames[c] : fmt::format("ch{}", c + 1);
}

}  // namespace

std::size_t SynthConfig::control_count() const {
  return static_cast<std::size_t>(std::llround(control_fraction * static_cast<double>(perturbations)));
}

void SynthConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(Errc::invalid_argument, "synth.{} must be positive", name);
  };
  positive(perturbations, "perturbations");
  positive(instances_min, "instances_min");
  positive(channels, "channels");
  positive(dim, "dim");
  positive(clusters, "clusters");
  positive(modifiers, "modifiers");
  positive(batches, "batches");
  if (instances_max < instances_min) fail(Errc::invalid_argument, "synth.instances_max must be >= synth.instances_min");
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(Errc::invalid_argument, "synth.{} must lie in [0, 1], got {}", name, v);
  };
  rate(control_fraction, "control_fraction");
  rate(false_positive_rate, "false_positive_rate");
  rate(relation_density, "relation_density");
  rate(train_fraction, "train_fraction");
  rate(val_fraction, "val_fraction");
  if (train_fraction + val_fraction > 1.0) fail(Errc::invalid_argument, "synth.train_fraction + synth.val_fraction exceeds 1");
  if (effect_strength < 0.0 || modifier_strength < 0.0 || batch_shift < 0.0 || noise_std < 0.0) {
    fail(Errc::invalid_argument, "synth strengths and noise must be non-negative");
  }
  if (control_count() == 0) fail(Errc::invalid_argument, "synth: control_fraction leaves no controls");
  if (control_count() >= perturbations) fail(Errc::invalid_argument, "synth: control_fraction leaves no treated perturbations");
  if (clusters > treated_count()) {
    fail(Errc::invalid_argument, "synth: {} clusters exceed the {} treated perturbations", clusters, treated_count());
  }
  if (treated_count() > clusters * modifiers) {
    fail(Errc::invalid_argument, "synth: {} treated perturbations exceed {} distinct cluster/modifier pairs",
         treated_count(), clusters * modifiers);
  }
  if (clusters > kClusterAtoms.size() || modifiers > kModifierAtoms.size()) {
    fail(Errc::invalid_argument, "synth: at most {} clusters and {} modifiers are supported", kClusterAtoms.size(),
         kModifierAtoms.size());
  }
  if (cell_type.empty()) fail(Errc::invalid_argument, "synth.cell_type must be non-empty");
}

KvList SynthConfig::entries() const {
  return {
      {"perturbations", std::to_string(perturbations)},
      {"control_fraction", format_double(control_fraction)},
      {"instances_min", std::to_string(instances_min)},
      {"instances_max", std::to_string(instances_max)},
      {"channels", std::to_string(channels)},
      {"dim", std::to_string(dim)},
      {"clusters", std::to_string(clusters)},
      {"modifiers", std::to_string(modifiers)},
      {"batches", std::to_string(batches)},
      {"effect_strength", format_double(effect_strength)},
      {"modifier_strength", format_double(modifier_strength)},
      {"batch_shift", format_double(batch_shift)},
      {"noise_std", format_double(noise_std)},
      {"false_positive_rate", format_double(false_positive_rate)},
      {"relation_density", format_double(relation_density)},
      {"train_fraction", format_double(train_fraction)},
      {"val_fraction", format_double(val_fraction)},
      {"cell_type", cell_type},
      {"seed", std::to_string(seed)},
  };
}

bool SynthConfig::set(std::string_view key, std::string_view value) {
  if (key == "perturbations") perturbations = parse_size(key, value);
  else if (key == "control_fraction") control_fraction = parse_double(key, value);
  else if (key == "instances_min") instances_min = parse_size(key, value);
  else if (key == "instances_max") instances_max = parse_size(key, value);
  else if (key == "channels") channels = parse_size(key, value);
  else if (key == "dim") dim = parse_size(key, value);
  else if (key == "clusters") clusters = parse_size(key, value);
  else if (key == "modifiers") modifiers = parse_size(key, value);
  else if (key == "batches") batches = parse_size(key, value);
  else if (key == "effect_strength") effect_strength = parse_double(key, value);
  else if (key == "modifier_strength") modifier_strength = parse_double(key, value);
  else if (key == "batch_shift") batch_shift = parse_double(key, value);
  else if (key == "noise_std") noise_std = parse_double(key, value);
  else if (key == "false_positive_rate") false_positive_rate = parse_double(key, value);
  else if (key == "relation_density") relation_density = parse_double(key, value);
  else if (key == "train_fraction") train_fraction = parse_double(key, value);
  else if (key == "val_fraction") val_fraction = parse_double(key, value);
  else if (key == "cell_type") cell_type = std::string(value);
  else if (key == "seed") seed = parse_u64(key, value);
  else return false;
  return true;
}

SyntheticScreen generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.channels, d = cfg.dim, n = C * d;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));

  Rng latent_rng = Rng::keyed({cfg.seed, 1});
  std::vector<std::vector<double>> cluster_latent, modifier_latent, batch_offset;
  for (std::size_t c = 0; c < cfg.clusters; ++c) cluster_latent.push_back(gaussian_block(latent_rng, n, unit));
  for (std::size_t m = 0; m < cfg.modifiers; ++m) modifier_latent.push_back(gaussian_block(latent_rng, n, unit));
  Rng batch_rng = Rng::keyed({cfg.seed, 2});
  for (std::size_t b = 0; b < cfg.batches; ++b) batch_offset.push_back(gaussian_block(batch_rng, n, cfg.batch_shift * unit));

  // Distinct pairs; the first `clusters` perturbations cover every cluster.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t c = 0; c < cfg.clusters; ++c)
    for (std::size_t m = 0; m < cfg.modifiers; ++m) pairs.emplace_back(c, m);
  Rng pair_rng = Rng::keyed({cfg.seed, 3});
  pair_rng.shuffle(pairs.begin(), pairs.end());
  std::stable_partition(pairs.begin(), pairs.end(), [&, covered = std::vector<bool>(cfg.clusters)](const auto& p) mutable {
    if (covered[p.first]) return false;
    covered[p.first] = true;
    return true;
  });

  SyntheticScreen out;
  auto& ds = out.dataset;
  ds.bundle.channels = C;
  ds.bundle.dim = d;
  for (std::size_t c = 0; c < C; ++c) ds.bundle.channel_names.push_back(channel_name(c));

  const std::size_t treated = cfg.treated_count();
  const char* prefixes[] = {"cpd", "crispr", "orf"};
  const text::PerturbationClass classes[] = {text::PerturbationClass::compound, text::PerturbationClass::crispr,
                                             text::PerturbationClass::orf};
  std::vector<std::string> treated_ids;
  for (std::size_t p = 0; p < cfg.perturbations; ++p) {
    const bool control = p >= treated;
    text::PerturbationRecord rec;
    rec.cell_type = cfg.cell_type;
    std::vector<double> effect(n, 0.0);
    if (control) {
      rec.id = fmt::format("ctrl-{:02d}", p - treated);
      rec.cls = text::PerturbationClass::control;
    } else {
      const auto [c, m] = pairs[p];
      rec.cls = classes[p % 3];
      rec.id = fmt::format("{}-{:03d}", prefixes[p % 3], p);
      if (rec.cls == text::PerturbationClass::compound) {
        rec.payload = fmt::format("{}C{}O", kClusterAtoms[c], kModifierAtoms[m]);
      } else {
        rec.payload = fmt::format("G{},M{}", c + 1, m + 1);
      }
      for (std::size_t j = 0; j < n; ++j) {
        effect[j] = cfg.effect_strength * (cluster_latent[c][j] + cfg.modifier_strength * modifier_latent[m][j]);
      }
      out.truth.push_back({rec.id, c, m});
      treated_ids.push_back(rec.id);
    }

    Rng rng = Rng::keyed({cfg.seed, 4, p});
    std::size_t count = cfg.instances_min + rng.below(cfg.instances_max - cfg.instances_min + 1);
    if (control) count = std::max(count, cfg.batches);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t b = k % cfg.batches;
      const bool null_draw = !control && rng.uniform() < cfg.false_positive_rate;
      std::vector<float> v(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double base = null_draw ? 0.0 : effect[j];
        v[j] = static_cast<float>(base + batch_offset[b][j] + cfg.noise_std * rng.normal());
      }
      MetadataRow row;
      row.image_id = fmt::format("{}/b{}/{}", rec.id, b + 1, k);
      row.record = rec;
      row.record.batch_id = fmt::format("b{}", b + 1);
      row.is_control = control;
      ds.bundle.ids.push_back(row.image_id);
      ds.bundle.values.insert(ds.bundle.values.end(), v.begin(), v.end());
      ds.metadata.push_back(std::move(row));
    }
  }

  Rng rel_rng = Rng::keyed({cfg.seed, 5});
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    for (std::size_t j = i + 1; j < out.truth.size(); ++j) {
      const auto& a = out.truth[i];
      const auto& b = out.truth[j];
      if (a.cluster == b.cluster && rel_rng.uniform() < cfg.relation_density) ds.relations.push_back({a.id, b.id, "cluster"});
      if (a.modifier == b.modifier && rel_rng.uniform() < cfg.relation_density) ds.relations.push_back({a.id, b.id, "modifier"});
    }
  }

  Rng split_rng = Rng::keyed({cfg.seed, 6});
  auto order = treated_ids;
  split_rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(treated)));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(treated)));
  for (std::size_t i = 0; i < order.size(); ++i) {
    ds.splits[order[i]] = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";
  }

  std::sort(out.truth.begin(), out.truth.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::string format_ground_truth(const std::vector<PlantedTruth>& truth) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : truth) rows.push_back({t.id, std::to_string(t.cluster), std::to_string(t.modifier)});
  return format_tsv({"perturbation_id", "cluster", "modifier"}, rows);
}

std::vector<PlantedTruth> parse_ground_truth(const Tsv& t) {
  const auto id = t.column("perturbation_id"), c = t.column("cluster"), m = t.column("modifier");
  std::vector<PlantedTruth> out;
  for (const auto& f : t.rows) out.push_back({f[id], parse_size("cluster", f[c]), parse_size("modifier", f[m])});
  return out;
}

}  // namespace cellclip::harness
