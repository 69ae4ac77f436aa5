#pragma once

// A screen on disk: a directory holding
//
//   profiles.bundle   per-image channel profiles
//   metadata.tsv      image_id perturbation_id class cell_type payload batch_id is_control
//   relations.tsv     id_a id_b source            (optional)
//   splits.tsv        perturbation_id split       (train|val|test; optional)
//   ground_truth.tsv  planted structure, synthetic screens only

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "harness/bundle.hpp"
#include "util/io.hpp"
#include "text/prompt.hpp"
#include "train/model.hpp"

namespace cellclip::harness {

inline constexpr const char* kBundleFile = "profiles.bundle";
inline constexpr const char* kMetadataFile = "metadata.tsv";
inline constexpr const char* kRelationsFile = "relations.tsv";
inline constexpr const char* kSplitsFile = "splits.tsv";
inline constexpr const char* kGroundTruthFile = "ground_truth.tsv";

struct MetadataRow {
  std::string image_id;
  text::PerturbationRecord record;  // record.batch_id is the image's batch
  bool is_control = false;
};

struct Relation {
  std::string id_a;
  std::string id_b;
  std::string source;
};

struct Dataset {
  EmbeddingBundle bundle;
  std::vector<MetadataRow> metadata;
  std::vector<Relation> relations;
  std::map<std::string, std::string> splits;  // perturbation id -> split
};

// One perturbation and the bundle rows of its images, in bundle order.
struct Perturbation {
  text::PerturbationRecord record;  // batch_id left empty
  bool is_control = false;
  std::vector<std::size_t> images;
  std::vector<std::string> batches;  // per image, parallel to images
};

std::vector<MetadataRow> parse_metadata(const Tsv& t);
std::string format_metadata(const std::vector<MetadataRow>& rows);
std::vector<Relation> parse_relations(const Tsv& t);
std::string format_relations(const std::vector<Relation>& rows);
std::map<std::string, std::string> parse_splits(const Tsv& t);
std::string format_splits(const std::map<std::string, std::string>& splits);

// Throws Errc::io or Errc::format on the first unreadable or malformed file.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const Dataset& d);

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Every check runs and every failure is listed with the offending ids.
ValidationReport validate_dataset(const Dataset& d);
// Reads and validates; a file that cannot be parsed becomes a report entry.
ValidationReport validate_dataset(const std::filesystem::path& dir);

// Sorted by id. Throws if images of one perturbation disagree on class,
// cell type, payload or control flag, or if a metadata image is missing from
// the bundle.
std::vector<Perturbation> group_perturbations(const Dataset& d);

// All images of p, or only those of one batch.
profile::InstanceBag make_bag(const Dataset& d, const Perturbation& p, const std::string* batch = nullptr);
std::vector<std::string> batches_of(const Perturbation& p);  // sorted, distinct

// Cross-modal pairs of the treated perturbations in one split ("*" = all).
std::vector<train::Example> make_examples(const Dataset& d, const std::vector<Perturbation>& perts,
                                          const std::string& split, std::string_view prompt_template);

// Gene annotations of CRISPR/ORF perturbations, from their payloads.
std::map<std::string, std::set<std::string>> gene_annotations(const std::vector<Perturbation>& perts);
std::map<std::string, std::string> class_labels(const std::vector<Perturbation>& perts);

}  // namespace cellclip::harness
