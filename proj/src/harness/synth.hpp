#pragma once

// Planted screen generator. Every treated perturbation gets a (cluster,
// modifier) pair; its effect is effect_strength * (A_cluster +
// modifier_strength * B_modifier) over C×d. Each image adds its batch's shift
// and isotropic noise; with probability false_positive_rate an image is drawn
// from the control distribution instead. Controls have no effect and appear
// in every batch.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "harness/dataset.hpp"
#include "util/kv.hpp"

namespace cellclip::harness {

struct SynthConfig {
  std::size_t perturbations = 64;  // including controls
  double control_fraction = 0.1;
  std::size_t instances_min = 4;
  std::size_t instances_max = 12;
  std::size_t channels = 5;
  std::size_t dim = 32;
  std::size_t clusters = 8;
  std::size_t modifiers = 8;
  std::size_t batches = 4;
  double effect_strength = 1.0;
  double modifier_strength = 0.7;
  double batch_shift = 0.5;
  double noise_std = 0.15;
  double false_positive_rate = 0.1;
  // Chance that a same-cluster (or same-modifier) pair is listed as a relation.
  double relation_density = 1.0;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  std::string cell_type = "U2OS";
  std::uint64_t seed = 0;

  std::size_t control_count() const;
  std::size_t treated_count() const { return perturbations - control_count(); }

  // Throws Errc::invalid_argument on a non-positive count, a rate outside
  // [0, 1] or an infeasible layout (more clusters than treated
  // perturbations, or more treated perturbations than cluster/modifier pairs).
  void validate() const;
  KvList entries() const;
  bool set(std::string_view key, std::string_view value);
};

struct PlantedTruth {
  std::string id;
  std::size_t cluster = 0;
  std::size_t modifier = 0;
};

struct SyntheticScreen {
  Dataset dataset;
  std::vector<PlantedTruth> truth;  // treated perturbations, sorted by id
};

SyntheticScreen generate_synthetic(const SynthConfig& config);

std::string format_ground_truth(const std::vector<PlantedTruth>& truth);
std::vector<PlantedTruth> parse_ground_truth(const Tsv& t);

}  // namespace cellclip::harness
