#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "relex/corpus.hpp"
#include "relex/experiment.hpp"
#include "relex/gradcheck.hpp"
#include "relex/train.hpp"

namespace {

int threads_from_env() {
  const char* env = std::getenv("RELEX_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

int cmd_schedule(std::size_t n) {
  const auto sizes = relex::doubling_schedule(n);
  for (std::size_t i = 0; i < sizes.size(); ++i) std::cout << (i ? " " : "") << sizes[i];
  std::cout << "\n";
  return 0;
}

int cmd_gradcheck(int configs, std::uint64_t seed) {
  const relex::GradCheckSummary summary = relex::run_gradient_suite(configs, seed);
  for (const auto& report : summary.components)
    std::printf("%-18s configs=%d  max_rel_error=%.3e\n", report.component.c_str(),
                report.configs, report.max_error);
  std::printf("overall max relative error: %.3e\n", summary.max_error);
  if (!summary.passed()) {
    std::cerr << "gradient check failed (tolerance 1e-4)\n";
    return 1;
  }
  return 0;
}

int cmd_synth(std::size_t n, int relations, std::uint64_t seed, const std::string& out) {
  const relex::Dataset ds = relex::synth_corpus(n, relations, seed);
  relex::save_corpus(ds, out);
  std::cout << "wrote " << ds.size() << " instances, " << ds.label_vocab.size()
            << " relations to " << out << "\n";
  return 0;
}

int cmd_run(const relex::RunOptions& options) {
  const auto rows = relex::run_experiment(options);
  std::cout << relex::metrics_csv_header() << "\n";
  for (const auto& row : rows) std::cout << relex::metrics_csv_line(row) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path) {
  const relex::Checkpoint model = relex::load_checkpoint(model_path);
  const relex::Dataset ds = relex::load_corpus(corpus_path);
  std::vector<std::string> golds;
  golds.reserve(ds.size());
  for (const auto& inst : ds.instances) golds.push_back(inst.relation);
  const relex::MetricsRow row =
      relex::score_predictions(golds, relex::predict(model, ds), model.label_vocab);
  std::printf("macro_p=%.6f macro_r=%.6f macro_f=%.6f micro_p=%.6f accuracy=%.6f\n", row.macro_p,
              row.macro_r, row.macro_f, row.micro_p, row.accuracy);
  return 0;
}

int cmd_tune(const relex::TuneOptions& options) {
  const auto rows = relex::tune(options);
  for (const auto& row : rows) {
    std::string line;
    for (const auto& [key, value] : row.values) {
      char buf[80];
      std::snprintf(buf, sizeof(buf), "%s=%g,", key.c_str(), value);
      line += buf;
    }
    char buf[200];
    if (options.mode == "pretrain") {
      std::snprintf(buf, sizeof(buf), "rand_index=%.6f", row.rand_index);
    } else {
      std::snprintf(buf, sizeof(buf), "macro_p=%.6f,macro_r=%.6f,macro_f=%.6f,accuracy=%.6f",
                    row.macro_p, row.macro_r, row.macro_f, row.accuracy);
    }
    std::cout << line << buf << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-extraction training toolkit"};
  app.require_subcommand(1);

  // schedule
  auto* schedule = app.add_subcommand("schedule", "print the doubling training-size schedule");
  std::size_t schedule_n = 0;
  schedule->add_option("--n", schedule_n, "training set size")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  int gc_configs = 50;
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--configs", gc_configs, "random configurations per component");
  gradcheck->add_option("--seed", gc_seed, "rng seed");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic relation corpus");
  std::size_t synth_n = 1000;
  int synth_relations = 4;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of instances")->required();
  synth->add_option("--relations", synth_relations, "number of relation labels")->required();
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--out", synth_out, "output JSONL path")->required();

  // run
  auto* run = app.add_subcommand("run", "run one experiment preset over the doubling schedule");
  relex::RunOptions run_options;
  std::string run_config_path;
  int run_dim = 25;
  run->add_option("--preset", run_options.preset, "B-H B-HL M-E-L M-E-LUE M-E-LUEW M-EW-L M-EW-LUE M-EW-LUEW")
      ->required();
  run->add_option("--corpus", run_options.corpus_path, "corpus JSONL")->required();
  run->add_option("--embeddings", run_options.embeddings_path,
                  "word vectors (text format); omitted: seeded random vectors");
  run->add_option("--seed", run_options.seed, "run seed");
  run->add_option("--out", run_options.out_dir, "output directory")->required();
  run->add_option("--config", run_config_path, "training config file");
  run->add_option("--dim", run_dim, "embedding dimension for generated vectors");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  std::string eval_model, eval_corpus;
  eval->add_option("--model", eval_model, "checkpoint JSON")->required();
  eval->add_option("--corpus", eval_corpus, "corpus JSONL")->required();

  // tune
  auto* tune = app.add_subcommand("tune", "grid search over hyperparameters");
  relex::TuneOptions tune_options;
  std::string tune_config_path;
  int tune_dim = 25;
  tune->add_option("--grid", tune_options.grid_path, "JSON grid file")->required();
  tune->add_option("--corpus", tune_options.corpus_path, "corpus JSONL")->required();
  tune->add_option("--mode", tune_options.mode, "pretrain | finetune")->required();
  tune->add_option("--embeddings", tune_options.embeddings_path, "word vectors");
  tune->add_option("--seed", tune_options.seed, "run seed");
  tune->add_option("--config", tune_config_path, "training config file");
  tune->add_option("--dim", tune_dim, "embedding dimension for generated vectors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (schedule->parsed()) return cmd_schedule(schedule_n);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_configs, gc_seed);
    if (synth->parsed()) return cmd_synth(synth_n, synth_relations, synth_seed, synth_out);
    if (run->parsed()) {
      try {
        relex::resolve_preset(run_options.preset);
      } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
      }
      if (!run_config_path.empty()) run_options.base_config = relex::load_config(run_config_path);
      if (run_options.base_config.dim <= 0 || run->count("--dim"))
        run_options.base_config.dim = run_dim;
      run_options.threads = threads_from_env();
      return cmd_run(run_options);
    }
    if (eval->parsed()) return cmd_eval(eval_model, eval_corpus);
    if (tune->parsed()) {
      if (!tune_config_path.empty())
        tune_options.base_config = relex::load_config(tune_config_path);
      if (tune_options.base_config.dim <= 0 || tune->count("--dim"))
        tune_options.base_config.dim = tune_dim;
      tune_options.threads = threads_from_env();
      return cmd_tune(tune_options);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
