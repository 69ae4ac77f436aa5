#include "train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "util/error.hpp"
#include "util/parallel.hpp"

namespace cellclip::train {

PairEmbeddings embed_examples(const CellClipModel<float>& model, const std::vector<Example>& examples) {
  const std::size_t n = examples.size();
  std::vector<std::vector<float>> img(n), txt(n);
  parallel_for(n, [&](std::size_t i) {
    img[i] = model.embed_bag(examples[i].bag);
    txt[i] = model.embed_prompt(examples[i].prompt);
  });
  PairEmbeddings out;
  out.image.dim = out.text.dim = model.config().image.output_dim;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> a(img[i].begin(), img[i].end()), b(txt[i].begin(), txt[i].end());
    out.image.push_back(examples[i].id, a);
    out.text.push_back(examples[i].id, b);
  }
  return out;
}

std::vector<RecallReport> cross_modal_recall(const PairEmbeddings& e, const std::vector<std::size_t>& ks) {
  std::vector<RecallReport> out;
  if (e.image.size() == 0) return out;
  const auto i2t = eval::cosine_similarity(e.image, e.text);
  const auto t2i = eval::cosine_similarity(e.text, e.image);
  for (auto k : ks) {
    if (k > e.image.size()) continue;
    out.push_back({k, eval::recall_at_k(i2t, k), eval::recall_at_k(t2i, k)});
  }
  return out;
}

double selection_metric(const std::vector<RecallReport>& r) {
  for (const auto& x : r)
    if (x.k == 1) return 0.5 * (x.image_to_text + x.text_to_image);
  fail(Errc::state, "Recall@1 is required for model selection");
}

namespace {

void check_sets(const std::vector<Example>& train_set, const TrainConfig& cfg) {
  if (train_set.empty()) fail(Errc::invalid_argument, "training set is empty");
  if (train_set.size() < cfg.batch_size) {
    fail(Errc::invalid_argument, "training set has {} examples, fewer than one batch of {}", train_set.size(),
         cfg.batch_size);
  }
}

}  // namespace

Trainer::Trainer(const ModelConfig& model, const TrainConfig& train, text::Vocabulary vocab,
                 std::vector<Example> train_set, std::vector<Example> val_set)
    : train_(train), train_set_(std::move(train_set)), val_set_(std::move(val_set)) {
  train_.validate();
  check_sets(train_set_, train_);
  model_ = CellClipModel<float>(model, std::move(vocab), train_.seed);
  params_ = model_.parameters();
  adam_.init(params_);
}

Trainer::Trainer(const Checkpoint& ckpt, std::vector<Example> train_set, std::vector<Example> val_set)
    : train_(ckpt.train), state_(ckpt.state), train_set_(std::move(train_set)), val_set_(std::move(val_set)) {
  train_.validate();
  check_sets(train_set_, train_);
  model_ = restore_model(ckpt);
  params_ = model_.parameters();
  adam_ = restore_optimizer(ckpt, model_);
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(train_set_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::keyed({train_.seed, 0x5348554646ULL, epoch});
  rng.shuffle(order.begin(), order.end());
  return order;
}

double Trainer::step(const RunOutputs& out) {
  if (done()) fail(Errc::state, "training already finished after {} steps", state_.step);
  const std::size_t per_epoch = batches_per_epoch();
  const std::size_t epoch = state_.step / per_epoch;
  const std::size_t b = state_.step % per_epoch;
  if (order_epoch_ != epoch) {
    order_ = epoch_order(epoch);
    order_epoch_ = epoch;
  }
  std::vector<const Example*> batch;
  for (std::size_t i = 0; i < train_.batch_size; ++i) batch.push_back(&train_set_[order_[b * train_.batch_size + i]]);

  for (auto& p : params_) p.var.zero_grad();
  const auto loss = model_.batch_loss(batch);
  const double value = static_cast<double>(loss.item());
  ad::backward(loss);
  const double lr = lr_schedule(state_.step, total_steps(), train_);
  adamw_step(params_, adam_, lr, {train_.beta1, train_.beta2, train_.eps, train_.weight_decay});
  model_.constrain();
  state_.epoch_loss_sum += value;
  ++state_.step;
  if (state_.step % per_epoch == 0) end_of_epoch(epoch + 1, out);
  return value;
}

void Trainer::end_of_epoch(std::size_t epoch, const RunOutputs& out) {
  const double mean_loss = state_.epoch_loss_sum / static_cast<double>(batches_per_epoch());
  log(out, "train", "loss", mean_loss);
  log(out, "train", "lr", lr_schedule(state_.step - 1, total_steps(), train_));
  log(out, "train", "logit_scale", model_.logit_scale());
  state_.epoch_loss_sum = 0.0;

  // Without a validation set the lowest training loss selects the model.
  double metric = -mean_loss;
  if (!val_set_.empty()) {
    const auto recall = cross_modal_recall(embed_examples(model_, val_set_), train_.recall_ks);
    for (const auto& r : recall) {
      log(out, "val", fmt::format("recall@{}/image_to_text", r.k), r.image_to_text);
      log(out, "val", fmt::format("recall@{}/text_to_image", r.k), r.text_to_image);
    }
    metric = selection_metric(recall);
    log(out, "val", "selection", metric);
  }
  if (out.progress) out.progress(fmt::format("epoch {}/{} loss {:.4f} val {:.4f}", epoch, train_.epochs, mean_loss, metric));
  if (metric >= state_.best_metric) {
    state_.best_metric = metric;
    state_.best_epoch = epoch;
    if (!out.best_checkpoint.empty()) save_checkpoint(out.best_checkpoint, checkpoint());
  }
}

void Trainer::log(const RunOutputs& out, const std::string& split, const std::string& metric, double value) const {
  if (out.log_tsv.empty()) return;
  const bool fresh = !std::filesystem::exists(out.log_tsv);
  std::ofstream f(out.log_tsv, std::ios::app);
  if (!f) fail(Errc::io, "cannot append to {}", out.log_tsv.string());
  if (fresh) f << "step\tsplit\tmetric\tvalue\n";
  f << state_.step << '\t' << split << '\t' << metric << '\t' << format_double(value) << '\n';
}

void Trainer::run(const RunOutputs& out) {
  while (!done()) step(out);
  if (!out.final_checkpoint.empty()) save_checkpoint(out.final_checkpoint, checkpoint());
}

Checkpoint Trainer::checkpoint() const { return make_checkpoint(model_, train_, adam_, state_); }

}  // namespace cellclip::train
