#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "relex/corpus.hpp"
#include "relex/eval.hpp"
#include "relex/experiment.hpp"
#include "test_helpers.hpp"

using namespace relex;
using relex::testing::temp_path;
using relex::testing::write_temp_file;

namespace {

struct CommandResult {
  int status = -1;
  std::string output;  // stdout only
};

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[512];
  while (std::size_t n = fread(buffer, 1, sizeof(buffer), pipe)) result.output.append(buffer, n);
  const int raw = pclose(pipe);
  result.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return result;
}

std::string cli_path() {
  const char* env = std::getenv("RELEX_CLI");
  REQUIRE_MESSAGE(env != nullptr, "RELEX_CLI must point at the relex binary");
  return env;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (i + j) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

}  // namespace

TEST_CASE("preset table resolves exactly as published") {
  struct Expected {
    const char* name;
    bool lstm, pre, word, ue, uw;
  };
  const Expected table[] = {
      {"B-H", false, false, false, false, false},
      {"B-HL", true, false, false, false, false},
      {"M-E-L", true, true, false, false, false},
      {"M-E-LUE", true, true, false, true, false},
      {"M-E-LUEW", true, true, false, true, true},
      {"M-EW-L", true, true, true, false, false},
      {"M-EW-LUE", true, true, true, true, false},
      {"M-EW-LUEW", true, true, true, true, true},
  };
  CHECK(all_presets().size() == 8);
  for (const auto& e : table) {
    const PresetSpec p = resolve_preset(e.name);
    CHECK(p.use_lstm == e.lstm);
    CHECK(p.pretrain == e.pre);
    CHECK(p.use_word_loss == e.word);
    CHECK(p.update_entity_vectors == e.ue);
    CHECK(p.update_word_vectors == e.uw);
  }
  CHECK_THROWS_AS(resolve_preset("B-X"), std::invalid_argument);
}

TEST_CASE("metrics csv formatting") {
  MetricsRow row;
  row.experiment = "B-H";
  row.train_size = 39;
  row.seed = 7;
  row.macro_p = 0.5;
  row.accuracy = 0.25;
  CHECK(metrics_csv_line(row) == "B-H,39,7,0.500000,0.000000,0.000000,0.000000,0.250000,");
  row.rand_index = 0.625;
  CHECK(metrics_csv_line(row) == "B-H,39,7,0.500000,0.000000,0.000000,0.000000,0.250000,0.625000");
}

TEST_CASE("run_experiment: schedule rows, reproducibility, learning curve") {
  const Dataset ds = synth_corpus(2000, 4, 1);
  const auto corpus = temp_path("exp_corpus.jsonl").string();
  save_corpus(ds, corpus);

  RunOptions options;
  options.preset = "B-H";
  options.corpus_path = corpus;
  options.seed = 1;
  options.out_dir = temp_path("exp_out").string();
  options.base_config.dim = 12;

  const auto rows = run_experiment(options);
  REQUIRE(rows.size() == 10);
  const std::size_t n_train = split(ds, {0.7, 0.1, 0.2}, options.seed, true)[0].size();
  CHECK(rows.front().train_size == doubling_schedule(n_train).front());
  CHECK(rows.back().train_size == n_train);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].train_size > rows[i - 1].train_size);

  // identical invocation, byte-identical csv
  RunOptions again = options;
  again.out_dir = temp_path("exp_out2").string();
  const auto rows2 = run_experiment(again);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(metrics_csv_line(rows[i]) == metrics_csv_line(rows2[i]));

  std::ifstream csv(std::filesystem::path(options.out_dir) / "metrics.csv");
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == metrics_csv_header());

  // accuracy trends upward with training size
  std::vector<double> sizes, accs;
  for (const auto& row : rows) {
    sizes.push_back(static_cast<double>(row.train_size));
    accs.push_back(row.accuracy);
  }
  CHECK(spearman_rho(sizes, accs) > 0.0);

  CHECK(std::filesystem::exists(std::filesystem::path(options.out_dir) / "model_final.json"));
}

TEST_CASE("tune evaluates the grid cross product") {
  const Dataset ds = synth_corpus(700, 3, 5);
  const auto corpus = temp_path("tune_corpus.jsonl").string();
  save_corpus(ds, corpus);

  TuneOptions options;
  options.corpus_path = corpus;
  options.seed = 3;
  options.base_config.dim = 10;
  options.base_config.max_epochs = 4;

  SUBCASE("single point") {
    options.grid_path = write_temp_file("grid1.json", R"({"alpha_fc": [0.1]})");
    options.mode = "finetune";
    const auto rows = tune(options);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].values.size() == 1);
    CHECK(std::isfinite(rows[0].accuracy));
  }
  SUBCASE("2x3 grid, finite metrics, ranked output") {
    options.grid_path =
        write_temp_file("grid6.json", R"({"alpha_fc": [0.1, 0.01], "lambda_fc": [1e-6, 1e-4, 1e-2]})");
    options.mode = "finetune";
    const auto rows = tune(options);
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(std::isfinite(rows[i].metric));
      if (i > 0) CHECK(rows[i].metric <= rows[i - 1].metric);
    }
  }
  SUBCASE("empty grid is an error") {
    options.grid_path = write_temp_file("grid0.json", R"({})");
    options.mode = "finetune";
    CHECK_THROWS_AS(tune(options), std::invalid_argument);
  }
  SUBCASE("unknown mode is an error") {
    options.grid_path = write_temp_file("gridm.json", R"({"alpha_fc": [0.1]})");
    options.mode = "finetun";
    CHECK_THROWS_AS(tune(options), std::invalid_argument);
  }
}

TEST_CASE("tune pretrain mode beats the shuffled-assignment baseline") {
  const Dataset ds = synth_corpus(600, 3, 11);
  const auto corpus = temp_path("tunep_corpus.jsonl").string();
  save_corpus(ds, corpus);

  TuneOptions options;
  options.grid_path = write_temp_file("gridp.json", R"({"alpha_pw": [0.1]})");
  options.corpus_path = corpus;
  options.mode = "pretrain";
  options.seed = 5;
  options.base_config.dim = 16;
  options.base_config.max_epochs = 12;
  options.base_config.update_entity_vectors = true;

  const auto rows = tune(options);
  REQUIRE(rows.size() == 1);

  // empirical permutation baseline with the same cluster sizes
  const auto parts = split(ds, {0.75, 0.125, 0.125}, options.seed, true);
  Dataset held;
  held.instances = parts[1].instances;
  held.instances.insert(held.instances.end(), parts[2].instances.begin(), parts[2].instances.end());
  held.rebuild_vocab();
  Partition gold;
  for (const auto& inst : held.instances) gold.push_back(ds.label_index(inst.relation));
  std::mt19937_64 rng(17);
  Partition shuffled = gold;
  double baseline = 0;
  const int rounds = 100;
  for (int r = 0; r < rounds; ++r) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    baseline += rand_index(shuffled, gold);
  }
  baseline /= rounds;
  INFO("rand ", rows[0].rand_index, " baseline ", baseline);
  CHECK(rows[0].rand_index > baseline);
}

TEST_CASE("cli: schedule, synth, gradcheck, usage errors") {
  const std::string cli = cli_path();

  const CommandResult schedule = run_command(cli + " schedule --n 19961");
  CHECK(schedule.status == 0);
  CHECK(schedule.output == "39 78 156 312 624 1248 2495 4990 9981 19961\n");

  const CommandResult bad_schedule = run_command(cli + " schedule --n 100 2>/dev/null");
  CHECK(bad_schedule.status == 1);

  const CommandResult usage = run_command(cli + " schedule 2>/dev/null");
  CHECK(usage.status == 2);

  const auto synth_out = temp_path("cli_synth.jsonl").string();
  const CommandResult synth =
      run_command(cli + " synth --n 50 --relations 3 --seed 2 --out " + synth_out);
  CHECK(synth.status == 0);
  const Dataset ds = load_corpus(synth_out);
  CHECK(ds.size() == 50);
  CHECK(ds.label_vocab.size() == 3);

  const CommandResult gradcheck = run_command(cli + " gradcheck --configs 3 --seed 5");
  CHECK(gradcheck.status == 0);
  CHECK(gradcheck.output.find("overall max relative error") != std::string::npos);

  const CommandResult unknown = run_command(cli + " frobnicate 2>/dev/null");
  CHECK(unknown.status == 2);
}

TEST_CASE("cli: unknown preset exits with a usage error") {
  const std::string cli = cli_path();
  const auto corpus = temp_path("cli_corpus.jsonl").string();
  save_corpus(synth_corpus(600, 3, 4), corpus);
  const CommandResult result = run_command(cli + " run --preset NOPE --corpus " + corpus +
                                           " --seed 1 --out " + temp_path("cli_out").string() +
                                           " 2>/dev/null");
  CHECK(result.status == 2);
}

TEST_CASE("cli: eval reports metrics for a trained model") {
  const std::string cli = cli_path();
  const auto corpus = temp_path("cli_eval_corpus.jsonl").string();
  save_corpus(synth_corpus(760, 3, 6), corpus);
  const auto out_dir = temp_path("cli_eval_out").string();

  const CommandResult run = run_command(cli + " run --preset B-H --corpus " + corpus +
                                        " --seed 2 --out " + out_dir + " --dim 8 2>/dev/null");
  REQUIRE(run.status == 0);
  const CommandResult eval = run_command(cli + " eval --model " + out_dir +
                                         "/model_final.json --corpus " + corpus + " 2>/dev/null");
  CHECK(eval.status == 0);
  CHECK(eval.output.find("accuracy=") != std::string::npos);
}
