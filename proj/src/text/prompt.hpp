#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cellclip::text {

enum class PerturbationClass { compound, crispr, orf, control };

PerturbationClass parse_class(std::string_view s);
std::string_view class_name(PerturbationClass c);

struct PerturbationRecord {
  std::string id;
  PerturbationClass cls = PerturbationClass::compound;
  std::string cell_type;
  // SMILES for compounds, comma-separated gene symbols for CRISPR/ORF.
  std::string payload;
  std::string batch_id;
};

// Gene symbols of a CRISPR/ORF payload, split on ',' or ';' and trimmed.
std::vector<std::string> split_genes(std::string_view payload);

// Placeholders {cell_type}, {perturbation}, {detail}. A [...] group is emitted
// only when every placeholder inside it expands to a non-empty string.
inline constexpr std::string_view kMainTemplate =
    "A cell painting image of {cell_type} cells treated with {perturbation}[, {detail}].";
inline constexpr std::string_view kShortTemplate =
    "A {cell_type} treated with {perturbation}[, with {detail}].";

// Throws Errc::invalid_argument if a non-control record has an empty payload.
std::string build_prompt(const PerturbationRecord& rec, std::string_view tmpl = kMainTemplate);

// Resolves "main" and "short" to the built-in templates; anything else is
// taken as a literal template.
std::string_view resolve_template(std::string_view name_or_template);

}  // namespace cellclip::text
