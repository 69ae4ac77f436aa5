#include "harness/commands.hpp"

#include "harness/manifest.hpp"
#include "harness/pipeline.hpp"
#include "harness/synth.hpp"
#include "text/tokenizer.hpp"
#include "train/trainer.hpp"
#include "util/error.hpp"
#include "util/io.hpp"
#include "util/parallel.hpp"

namespace cellclip::harness {

namespace {

class Recorder {
 public:
  Recorder(const CommandContext& ctx, std::string command) : ctx_(ctx) {
    m_.command = std::move(command);
    m_.argv = ctx.argv;
    m_.config = ctx.config;
    m_.threads = thread_count();
    m_.started_at = utc_now();
    std::filesystem::create_directories(ctx.out);
  }
  void input(const std::filesystem::path& p) { m_.inputs.emplace_back(p.string(), digest_path(p)); }
  std::filesystem::path output(const std::string& name) {
    outputs_.push_back(ctx_.out / name);
    return outputs_.back();
  }
  void finish() {
    for (const auto& p : outputs_)
      if (std::filesystem::exists(p)) m_.outputs.emplace_back(p.string(), digest_path(p));
    m_.finished_at = utc_now();
    auto name = m_.command;
    std::replace(name.begin(), name.end(), ' ', '_');
    write_manifest(ctx_.out / ("manifest_" + name + ".json"), m_);
  }
  void log(const std::string& s) const {
    if (ctx_.log) ctx_.log(s);
  }

 private:
  const CommandContext& ctx_;
  Manifest m_;
  std::vector<std::filesystem::path> outputs_;
};

Dataset load_valid(const std::filesystem::path& data) {
  auto d = load_dataset(data);
  const auto rep = validate_dataset(d);
  if (!rep.ok()) fail(Errc::validation, "dataset {} failed validation: {}", data.string(), rep.errors.front());
  return d;
}

EmbeddingSet load_embeddings(const std::filesystem::path& p) { return parse_embeddings(read_tsv(p)); }

void check_model_fits(const train::ModelConfig& m, const Dataset& d) {
  if (m.image.channels != d.bundle.channels || m.image.input_dim != d.bundle.dim) {
    fail(Errc::validation, "model expects {}x{} profiles (model.channels, model.input_dim), dataset has {}x{}",
         m.image.channels, m.image.input_dim, d.bundle.channels, d.bundle.dim);
  }
}

}  // namespace

void run_synth(const CommandContext& ctx) {
  Recorder rec(ctx, "synth");
  const auto screen = generate_synthetic(ctx.config.synth);
  for (const char* f : {kBundleFile, kMetadataFile, kRelationsFile, kSplitsFile, kGroundTruthFile}) rec.output(f);
  write_dataset(ctx.out, screen.dataset);
  write_file(ctx.out / kGroundTruthFile, format_ground_truth(screen.truth));
  rec.log(fmt::format("wrote {} images of {} perturbations to {}", screen.dataset.bundle.size(),
                      ctx.config.synth.perturbations, ctx.out.string()));
  rec.finish();
}

ValidationReport run_validate(const CommandContext& ctx, const std::filesystem::path& data) {
  Recorder rec(ctx, "validate");
  const auto path = rec.output("validation.txt");
  auto report = validate_dataset(data);
  if (std::filesystem::exists(data)) rec.input(data);
  std::string text;
  for (const auto& e : report.errors) text += e + "\n";
  write_file(path, report.ok() ? "ok\n" : text);
  rec.finish();
  return report;
}

void run_train(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& resume) {
  Recorder rec(ctx, "train");
  rec.input(data);
  const auto d = load_valid(data);
  const auto& cfg = ctx.config;
  check_model_fits(cfg.model, d);
  const auto perts = group_perturbations(d);
  auto train_set = make_examples(d, perts, "train", cfg.model.prompt_template);
  auto val_set = make_examples(d, perts, "val", cfg.model.prompt_template);

  train::RunOutputs out;
  out.log_tsv = rec.output(kTrainLogFile);
  out.best_checkpoint = rec.output(kBestCheckpoint);
  out.final_checkpoint = rec.output(kFinalCheckpoint);
  out.progress = ctx.log;

  std::optional<train::Trainer> trainer;
  if (!resume.empty()) {
    rec.input(resume);
    const auto ckpt = train::load_checkpoint(resume);
    trainer.emplace(ckpt, std::move(train_set), std::move(val_set));
  } else {
    std::vector<std::string> corpus;
    for (const auto& e : train_set) corpus.push_back(e.prompt);
    auto vocab = text::Vocabulary::build(corpus);
    std::filesystem::remove(out.log_tsv);
    trainer.emplace(cfg.model, cfg.train, std::move(vocab), std::move(train_set), std::move(val_set));
  }
  rec.log(fmt::format("training {} steps ({} per epoch)", trainer->total_steps(), trainer->batches_per_epoch()));
  trainer->run(out);
  rec.log(fmt::format("best epoch {} (selection {:.4f})", trainer->state().best_epoch, trainer->state().best_metric));
  rec.finish();
}

void run_embed(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& checkpoint) {
  Recorder rec(ctx, "embed");
  rec.input(data);
  rec.input(checkpoint);
  const auto d = load_valid(data);
  const auto model = train::restore_model(train::load_checkpoint(checkpoint));
  check_model_fits(model.config(), d);
  const auto e = embed_dataset(model, d);
  write_file(rec.output(kEmbeddingsFile), format_embeddings(e));
  rec.log(fmt::format("wrote {} embeddings", e.rows.size()));
  rec.finish();
}

void run_eval_retrieval(const CommandContext& ctx, const std::filesystem::path& data,
                        const std::filesystem::path& embeddings, const std::string& subset) {
  Recorder rec(ctx, "eval retrieval");
  rec.input(data);
  rec.input(embeddings);
  const auto d = load_valid(data);
  const auto rows = retrieval_metrics(load_embeddings(embeddings), d, subset, ctx.config.eval.recall_ks);
  write_file(rec.output("retrieval.tsv"), format_metrics(rows, ctx.config.hash()));
  rec.finish();
}

void run_eval_map(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& embeddings) {
  Recorder rec(ctx, "eval map");
  rec.input(data);
  rec.input(embeddings);
  const auto d = load_valid(data);
  const auto rows = map_metrics(load_embeddings(embeddings), d, ctx.config.eval);
  write_file(rec.output("map.tsv"), format_metrics(rows, ctx.config.hash()));
  rec.finish();
}

void run_eval_genegene(const CommandContext& ctx, const std::filesystem::path& data,
                       const std::filesystem::path& embeddings, const std::vector<double>& tails) {
  Recorder rec(ctx, "eval genegene");
  rec.input(data);
  rec.input(embeddings);
  const auto d = load_valid(data);
  const auto rows = genegene_metrics(load_embeddings(embeddings), d, tails, ctx.config.eval.aggregate);
  write_file(rec.output("genegene.tsv"), format_metrics(rows, ctx.config.hash()));
  rec.finish();
}

void run_batch_correct(const CommandContext& ctx, const std::filesystem::path& embeddings) {
  Recorder rec(ctx, "batch-correct");
  rec.input(embeddings);
  const auto out = batch_correct_embeddings(load_embeddings(embeddings), ctx.config.eval.kernel);
  write_file(rec.output(kCorrectedFile), format_embeddings(out));
  rec.finish();
}

void run_report(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& embeddings) {
  Recorder rec(ctx, "report");
  rec.input(data);
  rec.input(embeddings);
  const auto d = load_valid(data);
  const auto rows = genegene_metrics(load_embeddings(embeddings), d, parse_tails("0.02:0.20:0.02"), ctx.config.eval.aggregate);
  write_file(rec.output("report.tsv"), format_metrics(rows, ctx.config.hash()));
  rec.finish();
}

}  // namespace cellclip::harness
