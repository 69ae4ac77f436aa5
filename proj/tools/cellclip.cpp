// Command-line front end. Talks to the library only through cellclip.h.

#include <cellclip/cellclip.h>

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct ConfigDeleter {
  void operator()(cellclip_config* c) const { cellclip_config_free(c); }
};
struct RunDeleter {
  void operator()(cellclip_run* r) const { cellclip_run_free(r); }
};

int report(cellclip_status s) {
  if (s == CELLCLIP_OK) return kExitOk;
  std::fprintf(stderr, "cellclip: %s: %s\n", cellclip_status_name(s), cellclip_last_error());
  return kExitFailure;
}

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out = ".";
  std::vector<std::string> overrides;
  bool quiet = false;

  std::string data;
  std::string checkpoint;
  std::string resume;
  std::string embeddings;
  std::string subset = "test";
  std::string tails;
  std::string manifest;
};

int run_main(const std::vector<std::string>& args);

int dispatch(CLI::App& app, const Options& o, const std::vector<std::string>& args) {
  if (o.threads) {
    if (auto s = cellclip_set_threads(*o.threads); s != CELLCLIP_OK) return report(s);
  }

  if (app.got_subcommand("rerun")) {
    char** argv = nullptr;
    size_t argc = 0;
    if (auto s = cellclip_manifest_argv(o.manifest.c_str(), &argv, &argc); s != CELLCLIP_OK) return report(s);
    std::vector<std::string> replay(argv, argv + argc);
    cellclip_strings_free(argv, argc);
    if (replay.size() < 2 || replay[1] == "rerun") {
      std::fprintf(stderr, "cellclip: manifest %s holds no replayable command\n", o.manifest.c_str());
      return kExitFailure;
    }
    return run_main(replay);
  }

  cellclip_config* raw = nullptr;
  const auto s = o.config.empty() ? cellclip_config_new(&raw) : cellclip_config_load(o.config.c_str(), &raw);
  if (s != CELLCLIP_OK) return report(s);
  std::unique_ptr<cellclip_config, ConfigDeleter> config(raw);
  if (o.seed) cellclip_config_set_seed(config.get(), *o.seed);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "cellclip: --set expects key=value, got '%s'\n", kv.c_str());
      return kExitUsage;
    }
    const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (auto st = cellclip_config_set(config.get(), key.c_str(), value.c_str()); st != CELLCLIP_OK) {
      report(st);
      return kExitUsage;
    }
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  cellclip_run* run_raw = nullptr;
  if (auto st = cellclip_run_new(config.get(), o.out.c_str(), static_cast<int>(argv.size()), argv.data(), &run_raw);
      st != CELLCLIP_OK) {
    return report(st);
  }
  std::unique_ptr<cellclip_run, RunDeleter> run(run_raw);
  if (!o.quiet) cellclip_run_set_log(run.get(), log_line, nullptr);

  const char* data = o.data.c_str();
  const char* emb = o.embeddings.c_str();
  if (app.got_subcommand("synth")) return report(cellclip_synth(run.get()));
  if (app.got_subcommand("validate")) {
    size_t errors = 0;
    const auto st = cellclip_validate(run.get(), data, &errors);
    if (st == CELLCLIP_ERR_VALIDATION) {
      std::fprintf(stderr, "cellclip: %zu validation error(s)\n%s\n", errors, cellclip_last_error());
      return kExitFailure;
    }
    return report(st);
  }
  if (app.got_subcommand("train")) {
    return report(cellclip_train(run.get(), data, o.resume.empty() ? nullptr : o.resume.c_str()));
  }
  if (app.got_subcommand("embed")) return report(cellclip_embed(run.get(), data, o.checkpoint.c_str()));
  if (auto* eval = app.get_subcommand("eval"); eval->parsed()) {
    if (eval->got_subcommand("retrieval")) return report(cellclip_eval_retrieval(run.get(), data, emb, o.subset.c_str()));
    if (eval->got_subcommand("map")) return report(cellclip_eval_map(run.get(), data, emb));
    if (eval->got_subcommand("genegene")) {
      return report(cellclip_eval_genegene(run.get(), data, emb, o.tails.empty() ? nullptr : o.tails.c_str()));
    }
  }
  if (app.got_subcommand("batch-correct")) return report(cellclip_batch_correct(run.get(), emb));
  if (app.got_subcommand("report")) return report(cellclip_report(run.get(), data, emb));
  return kExitUsage;
}

int run_main(const std::vector<std::string>& args) {
  CLI::App app{"CellCLIP training and evaluation for synthetic high-content screens", "cellclip"};
  app.set_version_flag("--version", std::string(cellclip_version()));
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "run config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "seed for synthesis, initialization and permutations");
  app.add_option("--threads", o.threads, "worker threads (default: CELLCLIP_THREADS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--set", o.overrides, "override one config key, e.g. --set train.epochs=10");
  app.add_flag("-q,--quiet", o.quiet, "suppress progress messages");

  auto data_opt = [&](CLI::App* sub) { sub->add_option("--data", o.data, "dataset directory")->required(); };
  auto emb_opt = [&](CLI::App* sub) { sub->add_option("--embeddings", o.embeddings, "embeddings TSV")->required(); };

  app.add_subcommand("synth", "generate a synthetic screen into --out");
  data_opt(app.add_subcommand("validate", "check a dataset directory"));
  auto* train = app.add_subcommand("train", "train on the train split, select on val");
  data_opt(train);
  train->add_option("--resume", o.resume, "checkpoint to continue from");
  auto* embed = app.add_subcommand("embed", "write image and text latents for a checkpoint");
  data_opt(embed);
  embed->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();

  auto* eval = app.add_subcommand("eval", "evaluate embeddings");
  eval->require_subcommand(1);
  eval->fallthrough();
  auto* retrieval = eval->add_subcommand("retrieval", "cross-modal recall@k");
  data_opt(retrieval);
  emb_opt(retrieval);
  retrieval->add_option("--subset", o.subset, "split to evaluate (train, val, test or *)")->capture_default_str();
  auto* map = eval->add_subcommand("map", "replicate detection and sister matching mAP");
  data_opt(map);
  emb_opt(map);
  auto* gg = eval->add_subcommand("genegene", "gene-gene relationship recall");
  data_opt(gg);
  emb_opt(gg);
  gg->add_option("--tails", o.tails, "tail fractions, 'a,b,..' or 'start:stop:step'");

  emb_opt(app.add_subcommand("batch-correct", "kernel PCA on controls plus per-batch standardization"));
  auto* rep = app.add_subcommand("report", "all metrics and a tail-fraction sweep");
  data_opt(rep);
  emb_opt(rep);
  app.add_subcommand("rerun", "replay the command recorded in a manifest")
      ->add_option("manifest", o.manifest, "manifest JSON")->required()->check(CLI::ExistingFile);

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fputs(app.help().c_str(), stderr);
    return kExitUsage;
  }
  return dispatch(app, o, args);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_main(args);
}
