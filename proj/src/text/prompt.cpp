#include "text/prompt.hpp"

#include <algorithm>

#include "util/error.hpp"

namespace cellclip::text {

PerturbationClass parse_class(std::string_view s) {
  if (s == "compound") return PerturbationClass::compound;
  if (s == "crispr") return PerturbationClass::crispr;
  if (s == "orf") return PerturbationClass::orf;
  if (s == "control") return PerturbationClass::control;
  fail(Errc::format, "unknown perturbation class '{}'", s);
}

std::string_view class_name(PerturbationClass c) {
  switch (c) {
    case PerturbationClass::compound: return "compound";
    case PerturbationClass::crispr: return "crispr";
    case PerturbationClass::orf: return "orf";
    case PerturbationClass::control: return "control";
  }
  return "unknown";
}

std::vector<std::string> split_genes(std::string_view payload) {
  std::vector<std::string> genes;
  std::string cur;
  auto flush = [&] {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) genes.push_back(cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (char ch : payload) {
    if (ch == ',' || ch == ';') flush();
    else cur.push_back(ch);
  }
  flush();
  return genes;
}

namespace {

std::string expand(std::string_view tmpl, const std::string& cell, const std::string& pert,
                   const std::string& detail, bool& all_nonempty) {
  std::string out;
  all_nonempty = true;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close == std::string_view::npos) fail(Errc::invalid_argument, "unterminated placeholder in prompt template");
      auto key = tmpl.substr(i + 1, close - i - 1);
      const std::string* value = nullptr;
      if (key == "cell_type") value = &cell;
      else if (key == "perturbation") value = &pert;
      else if (key == "detail") value = &detail;
      else fail(Errc::invalid_argument, "unknown prompt placeholder '{}'", key);
      if (value->empty()) all_nonempty = false;
      out += *value;
      i = close + 1;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

}  // namespace

std::string build_prompt(const PerturbationRecord& rec, std::string_view tmpl) {
  std::string pert;
  std::string detail;
  switch (rec.cls) {
    case PerturbationClass::compound:
      if (rec.payload.empty()) fail(Errc::invalid_argument, "compound {} has no SMILES payload", rec.id);
      pert = rec.id;
      detail = "SMILES: " + rec.payload;
      break;
    case PerturbationClass::crispr:
    case PerturbationClass::orf: {
      const auto genes = split_genes(rec.payload);
      if (genes.empty()) fail(Errc::invalid_argument, "{} has no target genes", rec.id);
      pert = rec.cls == PerturbationClass::crispr ? "CRISPR" : "ORF";
      detail = "targeting genes: ";
      for (std::size_t i = 0; i < genes.size(); ++i) detail += (i ? ", " : "") + genes[i];
      break;
    }
    case PerturbationClass::control:
      pert = "control";
      break;
  }

  std::string out;
  bool unused = true;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '[') {
      auto close = tmpl.find(']', i);
      if (close == std::string_view::npos) fail(Errc::invalid_argument, "unterminated optional group in prompt template");
      bool complete = true;
      auto group = expand(tmpl.substr(i + 1, close - i - 1), rec.cell_type, pert, detail, complete);
      if (complete) out += group;
      i = close + 1;
    } else {
      auto next = std::min(tmpl.find('[', i), tmpl.size());
      out += expand(tmpl.substr(i, next - i), rec.cell_type, pert, detail, unused);
      i = next;
    }
  }
  return out;
}

std::string_view resolve_template(std::string_view name_or_template) {
  if (name_or_template == "main") return kMainTemplate;
  if (name_or_template == "short") return kShortTemplate;
  return name_or_template;
}

}  // namespace cellclip::text
