#include "harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "util/error.hpp"
#include "util/kv.hpp"

namespace cellclip::harness {

namespace {

const std::vector<std::string> kMetadataHeader{"image_id", "perturbation_id", "class", "cell_type", "payload",
                                               "batch_id", "is_control"};

// "a, b, c" with at most `limit` names shown.
std::string list_ids(const std::vector<std::string>& ids, std::size_t limit = 10) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > limit) out += fmt::format(" (+{} more)", ids.size() - limit);
  return out;
}

}  // namespace

std::vector<MetadataRow> parse_metadata(const Tsv& t) {
  std::vector<std::size_t> col;
  for (const auto& name : kMetadataHeader) col.push_back(t.column(name));
  std::vector<MetadataRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    MetadataRow m;
    m.image_id = f[col[0]];
    m.record.id = f[col[1]];
    m.record.cls = text::parse_class(f[col[2]]);
    m.record.cell_type = f[col[3]];
    m.record.payload = f[col[4]];
    m.record.batch_id = f[col[5]];
    m.is_control = parse_bool("is_control", f[col[6]]);
    if (m.image_id.empty() || m.record.id.empty() || m.record.batch_id.empty()) {
      fail(Errc::format, "{}: row {} has an empty image, perturbation or batch id", t.source, r + 2);
    }
    if (m.is_control != (m.record.cls == text::PerturbationClass::control)) {
      fail(Errc::format, "{}: row {} is_control disagrees with class '{}'", t.source, r + 2, f[col[2]]);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string format_metadata(const std::vector<MetadataRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& m : rows) {
    out.push_back({m.image_id, m.record.id, std::string(text::class_name(m.record.cls)), m.record.cell_type,
                   m.record.payload, m.record.batch_id, m.is_control ? "true" : "false"});
  }
  return format_tsv(kMetadataHeader, out);
}

std::vector<Relation> parse_relations(const Tsv& t) {
  const auto a = t.column("id_a"), b = t.column("id_b"), s = t.column("source");
  std::vector<Relation> out;
  for (const auto& f : t.rows) out.push_back({f[a], f[b], f[s]});
  return out;
}

std::string format_relations(const std::vector<Relation>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) out.push_back({r.id_a, r.id_b, r.source});
  return format_tsv({"id_a", "id_b", "source"}, out);
}

std::map<std::string, std::string> parse_splits(const Tsv& t) {
  const auto id = t.column("perturbation_id"), sp = t.column("split");
  std::map<std::string, std::string> out;
  for (const auto& f : t.rows) {
    if (f[sp] != "train" && f[sp] != "val" && f[sp] != "test") {
      fail(Errc::format, "{}: split '{}' for {} is not train, val or test", t.source, f[sp], f[id]);
    }
    if (!out.emplace(f[id], f[sp]).second) fail(Errc::format, "{}: {} is listed twice", t.source, f[id]);
  }
  return out;
}

std::string format_splits(const std::map<std::string, std::string>& splits) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [id, s] : splits) out.push_back({id, s});
  return format_tsv({"perturbation_id", "split"}, out);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.bundle = read_bundle(dir / kBundleFile);
  d.metadata = parse_metadata(read_tsv(dir / kMetadataFile));
  if (std::filesystem::exists(dir / kRelationsFile)) d.relations = parse_relations(read_tsv(dir / kRelationsFile));
  if (std::filesystem::exists(dir / kSplitsFile)) d.splits = parse_splits(read_tsv(dir / kSplitsFile));
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  write_bundle(dir / kBundleFile, d.bundle);
  write_file(dir / kMetadataFile, format_metadata(d.metadata));
  write_file(dir / kRelationsFile, format_relations(d.relations));
  write_file(dir / kSplitsFile, format_splits(d.splits));
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport rep;
  auto error = [&](std::string s) { rep.errors.push_back(std::move(s)); };

  std::unordered_map<std::string, std::size_t> bundle_index;
  for (std::size_t i = 0; i < d.bundle.size(); ++i) bundle_index.emplace(d.bundle.ids[i], i);

  std::vector<std::string> absent, duplicated;
  std::set<std::string> seen;
  for (const auto& m : d.metadata) {
    if (!bundle_index.count(m.image_id)) absent.push_back(m.image_id);
    if (!seen.insert(m.image_id).second) duplicated.push_back(m.image_id);
  }
  if (!absent.empty()) error(fmt::format("alignment: {} metadata image ids absent from the bundle: {}", absent.size(), list_ids(absent)));
  if (!duplicated.empty()) error(fmt::format("alignment: image ids listed more than once in metadata: {}", list_ids(duplicated)));
  std::vector<std::string> unlisted;
  for (const auto& id : d.bundle.ids)
    if (!seen.count(id)) unlisted.push_back(id);
  if (!unlisted.empty()) error(fmt::format("alignment: {} bundle items have no metadata row: {}", unlisted.size(), list_ids(unlisted)));

  std::set<std::string> names;
  for (const auto& n : d.bundle.channel_names) {
    if (n.empty() || !names.insert(n).second) {
      error(fmt::format("channels: channel names must be distinct and non-empty, got {}", list_ids(d.bundle.channel_names)));
      break;
    }
  }

  std::vector<std::string> non_finite;
  for (std::size_t i = 0; i < d.bundle.size(); ++i) {
    const auto v = d.bundle.item(i);
    if (std::any_of(v.begin(), v.end(), [](float x) { return !std::isfinite(x); })) non_finite.push_back(d.bundle.ids[i]);
  }
  if (!non_finite.empty()) error(fmt::format("values: {} items hold non-finite values: {}", non_finite.size(), list_ids(non_finite)));

  std::map<std::string, const MetadataRow*> first;
  std::set<std::string> inconsistent, empty_payload;
  std::map<std::string, std::size_t> controls_per_batch;
  for (const auto& m : d.metadata) {
    controls_per_batch[m.record.batch_id] += m.is_control ? 1 : 0;
    auto [it, fresh] = first.emplace(m.record.id, &m);
    const auto& a = it->second->record;
    if (!fresh && (a.cls != m.record.cls || a.cell_type != m.record.cell_type || a.payload != m.record.payload)) {
      inconsistent.insert(m.record.id);
    }
    if (!m.is_control && m.record.payload.empty()) empty_payload.insert(m.record.id);
  }
  if (!inconsistent.empty()) {
    error(fmt::format("metadata: perturbations with conflicting class, cell type or payload: {}",
                      list_ids({inconsistent.begin(), inconsistent.end()})));
  }
  if (!empty_payload.empty()) {
    error(fmt::format("metadata: treated perturbations without a payload: {}", list_ids({empty_payload.begin(), empty_payload.end()})));
  }
  std::vector<std::string> no_controls;
  for (const auto& [batch, n] : controls_per_batch)
    if (n == 0) no_controls.push_back(batch);
  if (!no_controls.empty()) error(fmt::format("controls: batches without any control image: {}", list_ids(no_controls)));

  std::set<std::string> unknown_rel;
  for (const auto& r : d.relations) {
    if (!first.count(r.id_a)) unknown_rel.insert(r.id_a);
    if (!first.count(r.id_b)) unknown_rel.insert(r.id_b);
  }
  if (!unknown_rel.empty()) {
    error(fmt::format("relations: unknown perturbation ids: {}", list_ids({unknown_rel.begin(), unknown_rel.end()})));
  }

  if (!d.splits.empty()) {
    std::vector<std::string> unknown_split, missing_split, control_split;
    for (const auto& [id, s] : d.splits) {
      auto it = first.find(id);
      if (it == first.end()) unknown_split.push_back(id);
      else if (it->second->is_control) control_split.push_back(id);
    }
    for (const auto& [id, m] : first)
      if (!m->is_control && !d.splits.count(id)) missing_split.push_back(id);
    if (!unknown_split.empty()) error(fmt::format("splits: unknown perturbation ids: {}", list_ids(unknown_split)));
    if (!control_split.empty()) error(fmt::format("splits: controls cannot be assigned a split: {}", list_ids(control_split)));
    if (!missing_split.empty()) error(fmt::format("splits: treated perturbations without a split: {}", list_ids(missing_split)));
  }
  return rep;
}

ValidationReport validate_dataset(const std::filesystem::path& dir) {
  try {
    return validate_dataset(load_dataset(dir));
  } catch (const Error& e) {
    return {{e.what()}};
  }
}

std::vector<Perturbation> group_perturbations(const Dataset& d) {
  std::unordered_map<std::string, std::size_t> bundle_index;
  for (std::size_t i = 0; i < d.bundle.size(); ++i) bundle_index.emplace(d.bundle.ids[i], i);
  std::map<std::string, Perturbation> by_id;
  for (const auto& m : d.metadata) {
    auto it = bundle_index.find(m.image_id);
    if (it == bundle_index.end()) fail(Errc::validation, "metadata image '{}' is absent from the bundle", m.image_id);
    auto [pit, fresh] = by_id.try_emplace(m.record.id);
    auto& p = pit->second;
    if (fresh) {
      p.record = m.record;
      p.record.batch_id.clear();
      p.is_control = m.is_control;
    } else if (p.record.cls != m.record.cls || p.record.cell_type != m.record.cell_type ||
               p.record.payload != m.record.payload) {
      fail(Errc::validation, "perturbation '{}' has conflicting metadata rows", m.record.id);
    }
    p.images.push_back(it->second);
    p.batches.push_back(m.record.batch_id);
  }
  std::vector<Perturbation> out;
  for (auto& [id, p] : by_id) {
    // Bundle order within a perturbation.
    std::vector<std::size_t> order(p.images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.images[a] < p.images[b]; });
    Perturbation q = p;
    for (std::size_t i = 0; i < order.size(); ++i) {
      q.images[i] = p.images[order[i]];
      q.batches[i] = p.batches[order[i]];
    }
    out.push_back(std::move(q));
  }
  return out;
}

profile::InstanceBag make_bag(const Dataset& d, const Perturbation& p, const std::string* batch) {
  profile::InstanceBag bag;
  bag.perturbation_id = p.record.id;
  for (std::size_t i = 0; i < p.images.size(); ++i) {
    if (batch && p.batches[i] != *batch) continue;
    bag.instances.push_back(d.bundle.profile(p.images[i]));
  }
  if (bag.instances.empty()) fail(Errc::invalid_argument, "perturbation '{}' has no images in the requested batch", p.record.id);
  return bag;
}

std::vector<std::string> batches_of(const Perturbation& p) {
  std::set<std::string> s(p.batches.begin(), p.batches.end());
  return {s.begin(), s.end()};
}

std::vector<train::Example> make_examples(const Dataset& d, const std::vector<Perturbation>& perts,
                                          const std::string& split, std::string_view prompt_template) {
  const auto tmpl = text::resolve_template(prompt_template);
  std::vector<train::Example> out;
  for (const auto& p : perts) {
    if (p.is_control) continue;
    if (split != "*") {
      auto it = d.splits.find(p.record.id);
      if (it == d.splits.end()) fail(Errc::validation, "perturbation '{}' has no split assignment", p.record.id);
      if (it->second != split) continue;
    }
    out.push_back({p.record.id, make_bag(d, p), text::build_prompt(p.record, tmpl)});
  }
  return out;
}

std::map<std::string, std::set<std::string>> gene_annotations(const std::vector<Perturbation>& perts) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& p : perts) {
    if (p.record.cls != text::PerturbationClass::crispr && p.record.cls != text::PerturbationClass::orf) continue;
    const auto genes = text::split_genes(p.record.payload);
    out[p.record.id] = {genes.begin(), genes.end()};
  }
  return out;
}

std::map<std::string, std::string> class_labels(const std::vector<Perturbation>& perts) {
  std::map<std::string, std::string> out;
  for (const auto& p : perts) out[p.record.id] = std::string(text::class_name(p.record.cls));
  return out;
}

}  // namespace cellclip::harness
