#include "harness/pipeline.hpp"

#include <algorithm>
#include <set>

#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/kv.hpp"
#include "util/parallel.hpp"

namespace cellclip::harness {

eval::ScreenEmbeddings EmbeddingSet::screen() const {
  eval::ScreenEmbeddings s;
  s.table.dim = dim;
  for (const auto& r : rows)
    if (r.modality == "image" && r.batch != kAllBatches) s.push_back(r.id, r.batch, r.control, r.v);
  return s;
}

eval::EmbeddingTable EmbeddingSet::pooled(const std::string& modality, const std::vector<std::string>* ids) const {
  std::set<std::string> keep;
  if (ids) keep.insert(ids->begin(), ids->end());
  eval::EmbeddingTable t;
  t.dim = dim;
  for (const auto& r : rows) {
    if (r.modality != modality || r.batch != kAllBatches) continue;
    if (ids && !keep.count(r.id)) continue;
    t.push_back(r.id, r.v);
  }
  return t;
}

std::string format_embeddings(const EmbeddingSet& e) {
  std::vector<std::string> header{"modality", "perturbation_id", "batch_id", "is_control", "class"};
  for (std::size_t j = 0; j < e.dim; ++j) header.push_back(fmt::format("e{}", j));
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : e.rows) {
    if (r.v.size() != e.dim) fail(Errc::shape, "embedding row '{}' has width {}, expected {}", r.id, r.v.size(), e.dim);
    std::vector<std::string> f{r.modality, r.id, r.batch, r.control ? "true" : "false", r.cls};
    for (double x : r.v) f.push_back(format_double(x));
    rows.push_back(std::move(f));
  }
  return format_tsv(header, rows);
}

EmbeddingSet parse_embeddings(const Tsv& t) {
  EmbeddingSet e;
  const auto mod = t.column("modality"), id = t.column("perturbation_id"), batch = t.column("batch_id"),
             ctl = t.column("is_control"), cls = t.column("class");
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; t.has_column(fmt::format("e{}", j)); ++j) cols.push_back(t.column(fmt::format("e{}", j)));
  if (cols.empty()) fail(Errc::format, "{}: no embedding columns", t.source);
  e.dim = cols.size();
  for (const auto& f : t.rows) {
    EmbeddingRow r{f[mod], f[id], f[batch], parse_bool("is_control", f[ctl]), f[cls], {}};
    if (r.modality != "image" && r.modality != "text") fail(Errc::format, "{}: unknown modality '{}'", t.source, r.modality);
    for (auto c : cols) r.v.push_back(parse_double("embedding", f[c]));
    e.rows.push_back(std::move(r));
  }
  return e;
}

EmbeddingSet embed_dataset(const train::CellClipModel<float>& model, const Dataset& d) {
  const auto perts = group_perturbations(d);
  const auto tmpl = text::resolve_template(model.config().prompt_template);
  struct Job {
    const Perturbation* p;
    std::string modality;
    std::string batch;
  };
  std::vector<Job> jobs;
  for (const auto& p : perts) {
    for (const auto& b : batches_of(p)) jobs.push_back({&p, "image", b});
    if (!p.is_control) {
      jobs.push_back({&p, "image", kAllBatches});
      jobs.push_back({&p, "text", kAllBatches});
    }
  }
  EmbeddingSet out;
  out.dim = model.config().image.output_dim;
  out.rows.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& j = jobs[i];
    std::vector<float> v;
    if (j.modality == "text") {
      v = model.embed_prompt(text::build_prompt(j.p->record, tmpl));
    } else {
      const std::string* batch = j.batch == kAllBatches ? nullptr : &j.batch;
      v = model.embed_bag(make_bag(d, *j.p, batch));
    }
    out.rows[i] = {j.modality, j.p->record.id, j.batch, j.p->is_control, std::string(text::class_name(j.p->record.cls)),
                   {v.begin(), v.end()}};
  });
  return out;
}

std::string format_metrics(const std::vector<MetricRow>& rows, std::uint64_t config_hash) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    out.push_back({r.task, r.subset, r.metric, format_double(r.value), std::to_string(r.n),
                   r.p_filtered_fraction ? format_double(*r.p_filtered_fraction) : "NA", hex64(config_hash)});
  }
  return format_tsv({"task", "subset", "metric", "value", "n", "p_filtered_fraction", "config_hash"}, out);
}

std::vector<std::string> split_ids(const Dataset& d, const std::string& split) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& m : d.metadata) {
    if (m.is_control || !seen.insert(m.record.id).second) continue;
    if (split != "*") {
      auto it = d.splits.find(m.record.id);
      if (it == d.splits.end() || it->second != split) continue;
    }
    ids.push_back(m.record.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<MetricRow> retrieval_metrics(const EmbeddingSet& e, const Dataset& d, const std::string& subset,
                                         const std::vector<std::size_t>& ks) {
  const auto ids = split_ids(d, subset);
  if (ids.empty()) fail(Errc::validation, "no treated perturbations in subset '{}'", subset);
  const auto img = e.pooled("image", &ids);
  const auto txt = e.pooled("text", &ids);
  if (img.size() != ids.size() || txt.size() != ids.size()) {
    fail(Errc::validation, "embeddings cover {} images and {} prompts of the {} perturbations in '{}'", img.size(),
         txt.size(), ids.size(), subset);
  }
  const auto i2t = eval::cosine_similarity(img, txt);
  const auto t2i = eval::cosine_similarity(txt, img);
  const std::string name = subset == "*" ? "all" : subset;
  std::vector<MetricRow> rows;
  for (auto k : ks) {
    if (k > ids.size()) continue;
    rows.push_back({"retrieval", name, fmt::format("recall@{}/image_to_text", k), eval::recall_at_k(i2t, k), ids.size(), {}});
    rows.push_back({"retrieval", name, fmt::format("recall@{}/text_to_image", k), eval::recall_at_k(t2i, k), ids.size(), {}});
  }
  return rows;
}

namespace {

void add_map_rows(std::vector<MetricRow>& rows, const std::string& task, const std::string& subset,
                  const eval::MapReport& r) {
  const std::size_t n = r.queries.size();
  rows.push_back({task, subset, "map", r.map, n, r.retained_fraction});
  rows.push_back({task, subset, "map_filtered", r.map_filtered, n, r.retained_fraction});
  for (const auto& [cls, v] : r.per_class) rows.push_back({task, subset, "map/" + cls, v, n, r.retained_fraction});
  for (const auto& [cls, v] : r.per_class_filtered) {
    rows.push_back({task, subset, "map_filtered/" + cls, v, n, r.retained_fraction});
  }
}

eval::ScreenEmbeddings restrict(const eval::ScreenEmbeddings& s, const std::set<std::string>& keep) {
  eval::ScreenEmbeddings out;
  out.table.dim = s.table.dim;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (keep.count(s.table.ids[i])) out.push_back(s.table.ids[i], s.batch[i], s.control[i], s.table.row(i));
  return out;
}

}  // namespace

std::vector<MetricRow> map_metrics(const EmbeddingSet& e, const Dataset& d, const EvalConfig& config) {
  const auto perts = group_perturbations(d);
  const auto classes = class_labels(perts);
  const auto screen = e.screen();
  const eval::MapOptions opt{config.permutations, config.alpha, config.seed};
  std::vector<MetricRow> rows;
  add_map_rows(rows, "replicate_detection", "observed", eval::replicate_detection_map(screen, opt, classes));
  add_map_rows(rows, "replicate_detection", "shuffled_labels",
               eval::replicate_detection_map(eval::shuffle_labels(screen, config.seed), opt, classes));

  const auto genes = gene_annotations(perts);
  if (genes.size() >= 2) {
    std::set<std::string> keep;
    for (const auto& [id, g] : genes) keep.insert(id);
    const auto annotated = restrict(screen, keep);
    add_map_rows(rows, "sister_matching", "within",
                 eval::sister_matching_map(annotated, genes, classes, eval::SisterMode::within, opt));
    add_map_rows(rows, "sister_matching", "across",
                 eval::sister_matching_map(annotated, genes, classes, eval::SisterMode::across, opt));
  }
  return rows;
}

std::vector<MetricRow> genegene_metrics(const EmbeddingSet& e, const Dataset& d, const std::vector<double>& tails,
                                        eval::Aggregate aggregate) {
  const auto table = eval::aggregate_by_id(e.screen(), aggregate, true);
  std::map<std::string, std::vector<eval::IdPair>> by_source;
  for (const auto& r : d.relations) {
    by_source[r.source].emplace_back(r.id_a, r.id_b);
    by_source["all"].emplace_back(r.id_a, r.id_b);
  }
  if (by_source.empty()) fail(Errc::validation, "dataset has no relations for gene-gene recall");
  std::vector<MetricRow> rows;
  for (const auto& [source, pairs] : by_source) {
    for (double f : tails) {
      const auto r = eval::gene_gene_recall(table, pairs, f);
      rows.push_back({"gene_gene", source, fmt::format("recall@tail={}", format_double(f)), r.recall, r.known, {}});
    }
  }
  return rows;
}

EmbeddingSet batch_correct_embeddings(const EmbeddingSet& e, const eval::KernelConfig& config) {
  const auto corrected = eval::batch_correct(e.screen(), config);
  EmbeddingSet out;
  out.dim = corrected.table.dim;
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  std::size_t k = 0;
  for (const auto& r : e.rows) {
    if (r.modality != "image" || r.batch == kAllBatches) continue;
    const auto v = corrected.table.row(k++);
    out.rows.push_back({r.modality, r.id, r.batch, r.control, r.cls, {v.begin(), v.end()}});
    auto& [sum, count] = sums[r.id];
    if (sum.empty()) sum.assign(out.dim, 0.0);
    for (std::size_t j = 0; j < out.dim; ++j) sum[j] += v[j];
    ++count;
  }
  for (const auto& r : e.rows) {
    if (r.modality != "image" || r.batch != kAllBatches) continue;
    const auto& [sum, count] = sums.at(r.id);
    std::vector<double> mean(sum);
    for (auto& x : mean) x /= static_cast<double>(count);
    out.rows.push_back({r.modality, r.id, r.batch, r.control, r.cls, std::move(mean)});
  }
  return out;
}

}  // namespace cellclip::harness
