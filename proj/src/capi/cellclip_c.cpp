#include "cellclip/cellclip.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "eval/retrieval.hpp"
#include "harness/commands.hpp"
#include "harness/manifest.hpp"
#include "train/checkpoint.hpp"
#include "util/error.hpp"
#include "util/parallel.hpp"

using namespace cellclip;

struct cellclip_config {
  harness::RunConfig config;
};

struct cellclip_run {
  harness::CommandContext ctx;
  cellclip_log_fn log = nullptr;
  void* user = nullptr;
};

struct cellclip_model {
  train::CellClipModel<float> model;
};

namespace {

thread_local std::string g_last_error;

cellclip_status fail_with(cellclip_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <class F>
cellclip_status guard(F&& f) {
  try {
    f();
    return CELLCLIP_OK;
  } catch (const Error& e) {
    return fail_with(static_cast<cellclip_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail_with(CELLCLIP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail_with(CELLCLIP_ERR_INTERNAL, e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(Errc::invalid_argument, "{} must not be NULL", what);
}

}  // namespace

extern "C" {

const char* cellclip_version(void) { return harness::kVersion; }

const char* cellclip_last_error(void) { return g_last_error.c_str(); }

const char* cellclip_status_name(cellclip_status status) {
  switch (status) {
    case CELLCLIP_OK: return "ok";
    case CELLCLIP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CELLCLIP_ERR_SHAPE: return "shape";
    case CELLCLIP_ERR_NUMERIC: return "numeric";
    case CELLCLIP_ERR_IO: return "io";
    case CELLCLIP_ERR_FORMAT: return "format";
    case CELLCLIP_ERR_VALIDATION: return "validation";
    case CELLCLIP_ERR_STATE: return "state";
    case CELLCLIP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

cellclip_status cellclip_set_threads(size_t threads) {
  return guard([&] { set_thread_count(threads); });
}

cellclip_status cellclip_config_new(cellclip_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new cellclip_config{harness::RunConfig::desk()};
  });
}

cellclip_status cellclip_config_load(const char* path, cellclip_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cellclip_config{harness::load_run_config(path)};
  });
}

void cellclip_config_free(cellclip_config* config) { delete config; }

cellclip_status cellclip_config_set(cellclip_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.apply({{key, value}});
  });
}

cellclip_status cellclip_config_get(const cellclip_config* config, const char* key, char* buf, size_t capacity,
                                    size_t* needed) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    for (const auto& [k, v] : config->config.entries()) {
      if (k != key) continue;
      if (needed) *needed = v.size() + 1;
      if (buf && capacity > v.size()) std::memcpy(buf, v.c_str(), v.size() + 1);
      else if (buf) fail(Errc::invalid_argument, "buffer of {} bytes is too small for '{}' ({} needed)", capacity, key, v.size() + 1);
      return;
    }
    fail(Errc::invalid_argument, "unknown config key '{}'", key);
  });
}

cellclip_status cellclip_config_set_seed(cellclip_config* config, uint64_t seed) {
  return guard([&] {
    require(config, "config");
    config->config.set_seed(seed);
  });
}

cellclip_status cellclip_config_validate(const cellclip_config* config) {
  return guard([&] {
    require(config, "config");
    config->config.validate();
  });
}

cellclip_status cellclip_config_hash(const cellclip_config* config, uint64_t* out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = config->config.hash();
  });
}

cellclip_status cellclip_run_new(const cellclip_config* config, const char* out_dir, int argc, const char* const* argv,
                                 cellclip_run** out) {
  return guard([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    require(out, "out");
    if (argc < 0 || (argc > 0 && !argv)) fail(Errc::invalid_argument, "argv must hold argc strings");
    config->config.validate();
    auto run = new cellclip_run;
    run->ctx.config = config->config;
    run->ctx.out = out_dir;
    for (int i = 0; i < argc; ++i) run->ctx.argv.emplace_back(argv[i] ? argv[i] : "");
    *out = run;
  });
}

void cellclip_run_free(cellclip_run* run) { delete run; }

cellclip_status cellclip_run_set_log(cellclip_run* run, cellclip_log_fn fn, void* user) {
  return guard([&] {
    require(run, "run");
    run->log = fn;
    run->user = user;
    if (fn) {
      run->ctx.log = [run](const std::string& s) { run->log(s.c_str(), run->user); };
    } else {
      run->ctx.log = nullptr;
    }
  });
}

cellclip_status cellclip_synth(cellclip_run* run) {
  return guard([&] {
    require(run, "run");
    harness::run_synth(run->ctx);
  });
}

cellclip_status cellclip_validate(cellclip_run* run, const char* data_dir, size_t* error_count) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    const auto rep = harness::run_validate(run->ctx, data_dir);
    if (error_count) *error_count = rep.errors.size();
    if (!rep.ok()) {
      std::string msg;
      for (const auto& e : rep.errors) msg += (msg.empty() ? "" : "\n") + e;
      throw Error(Errc::validation, msg);
    }
  });
}

cellclip_status cellclip_train(cellclip_run* run, const char* data_dir, const char* resume_checkpoint) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    harness::run_train(run->ctx, data_dir, resume_checkpoint ? std::filesystem::path(resume_checkpoint) : std::filesystem::path{});
  });
}

cellclip_status cellclip_embed(cellclip_run* run, const char* data_dir, const char* checkpoint) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(checkpoint, "checkpoint");
    harness::run_embed(run->ctx, data_dir, checkpoint);
  });
}

cellclip_status cellclip_eval_retrieval(cellclip_run* run, const char* data_dir, const char* embeddings,
                                        const char* subset) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(embeddings, "embeddings");
    harness::run_eval_retrieval(run->ctx, data_dir, embeddings, subset ? subset : "test");
  });
}

cellclip_status cellclip_eval_map(cellclip_run* run, const char* data_dir, const char* embeddings) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(embeddings, "embeddings");
    harness::run_eval_map(run->ctx, data_dir, embeddings);
  });
}

cellclip_status cellclip_eval_genegene(cellclip_run* run, const char* data_dir, const char* embeddings,
                                       const char* tails) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(embeddings, "embeddings");
    const auto fractions = tails ? harness::parse_tails(tails) : run->ctx.config.eval.tails;
    harness::run_eval_genegene(run->ctx, data_dir, embeddings, fractions);
  });
}

cellclip_status cellclip_batch_correct(cellclip_run* run, const char* embeddings) {
  return guard([&] {
    require(run, "run");
    require(embeddings, "embeddings");
    harness::run_batch_correct(run->ctx, embeddings);
  });
}

cellclip_status cellclip_report(cellclip_run* run, const char* data_dir, const char* embeddings) {
  return guard([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(embeddings, "embeddings");
    harness::run_report(run->ctx, data_dir, embeddings);
  });
}

cellclip_status cellclip_manifest_argv(const char* manifest_path, char*** argv, size_t* argc) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    require(argv, "argv");
    require(argc, "argc");
    const auto args = harness::read_manifest_argv(manifest_path);
    auto** out = static_cast<char**>(std::calloc(args.size() + 1, sizeof(char*)));
    if (!out) throw std::bad_alloc();
    for (std::size_t i = 0; i < args.size(); ++i) {
      out[i] = static_cast<char*>(std::malloc(args[i].size() + 1));
      if (!out[i]) {
        cellclip_strings_free(out, i);
        throw std::bad_alloc();
      }
      std::memcpy(out[i], args[i].c_str(), args[i].size() + 1);
    }
    *argv = out;
    *argc = args.size();
  });
}

void cellclip_strings_free(char** strings, size_t count) {
  if (!strings) return;
  for (size_t i = 0; i < count; ++i) std::free(strings[i]);
  std::free(strings);
}

cellclip_status cellclip_model_load(const char* checkpoint, cellclip_model** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = new cellclip_model{train::restore_model(train::load_checkpoint(checkpoint))};
  });
}

void cellclip_model_free(cellclip_model* model) { delete model; }

cellclip_status cellclip_model_dims(const cellclip_model* model, size_t* output_dim, size_t* channels,
                                    size_t* input_dim) {
  return guard([&] {
    require(model, "model");
    const auto& c = model->model.config().image;
    if (output_dim) *output_dim = c.output_dim;
    if (channels) *channels = c.channels;
    if (input_dim) *input_dim = c.input_dim;
  });
}

cellclip_status cellclip_model_embed_bag(const cellclip_model* model, const float* values, size_t instances,
                                         float* out) {
  return guard([&] {
    require(model, "model");
    require(values, "values");
    require(out, "out");
    if (instances == 0) fail(Errc::invalid_argument, "a bag needs at least one instance");
    const auto& c = model->model.config().image;
    profile::InstanceBag bag;
    bag.perturbation_id = "bag";
    const std::size_t per = c.channels * c.input_dim;
    for (std::size_t k = 0; k < instances; ++k) {
      bag.instances.push_back({"bag/" + std::to_string(k), c.channels, c.input_dim,
                               std::vector<float>(values + k * per, values + (k + 1) * per)});
    }
    const auto v = model->model.embed_bag(bag);
    std::copy(v.begin(), v.end(), out);
  });
}

cellclip_status cellclip_model_embed_prompt(const cellclip_model* model, const char* prompt, float* out) {
  return guard([&] {
    require(model, "model");
    require(prompt, "prompt");
    require(out, "out");
    const auto v = model->model.embed_prompt(prompt);
    std::copy(v.begin(), v.end(), out);
  });
}

cellclip_status cellclip_average_precision(const int* relevance, size_t n, double* out) {
  return guard([&] {
    require(relevance, "relevance");
    require(out, "out");
    std::vector<bool> r(n);
    for (size_t i = 0; i < n; ++i) r[i] = relevance[i] != 0;
    *out = eval::average_precision(r);
  });
}

cellclip_status cellclip_recall_at_k(const double* similarity, size_t n, size_t k, double* out) {
  return guard([&] {
    require(similarity, "similarity");
    require(out, "out");
    eval::SimilarityMatrix s;
    for (size_t i = 0; i < n; ++i) {
      s.row_ids.push_back(fmt::format("{:020d}", i));
      s.col_ids.push_back(s.row_ids.back());
    }
    s.s.assign(similarity, similarity + n * n);
    s.validate();
    *out = eval::recall_at_k(s, k);
  });
}

}  // extern "C"
