#include "relex/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"
#include "relex/embed.hpp"
#include "relex/util.hpp"

namespace relex {

const std::vector<PresetSpec>& all_presets() {
  static const std::vector<PresetSpec> presets = {
      //            name        lstm  pretrain word  upd_e  upd_w
      PresetSpec{"B-H", false, false, false, false, false},
      PresetSpec{"B-HL", true, false, false, false, false},
      PresetSpec{"M-E-L", true, true, false, false, false},
      PresetSpec{"M-E-LUE", true, true, false, true, false},
      PresetSpec{"M-E-LUEW", true, true, false, true, true},
      PresetSpec{"M-EW-L", true, true, true, false, false},
      PresetSpec{"M-EW-LUE", true, true, true, true, false},
      PresetSpec{"M-EW-LUEW", true, true, true, true, true},
  };
  return presets;
}

PresetSpec resolve_preset(const std::string& name) {
  for (const auto& p : all_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset: " + name);
}

std::string metrics_csv_header() {
  return "experiment,train_size,seed,macro_p,macro_r,macro_f,micro_p,accuracy,rand_index";
}

std::string metrics_csv_line(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,",
                row.experiment.c_str(), row.train_size,
                static_cast<unsigned long long>(row.seed), row.macro_p, row.macro_r, row.macro_f,
                row.micro_p, row.accuracy);
  std::string line(buf);
  if (row.rand_index) {
    std::snprintf(buf, sizeof(buf), "%.6f", *row.rand_index);
    line += buf;
  }
  return line;
}

MetricsRow score_predictions(const std::vector<std::string>& golds,
                             const std::vector<std::string>& predictions,
                             const std::vector<std::string>& model_labels) {
  const std::set<std::string> known(model_labels.begin(), model_labels.end());
  std::set<std::string> warned;
  for (const auto& g : golds) {
    if (known.count(g) == 0 && warned.insert(g).second)
      std::cerr << "warning: gold label '" << g
                << "' is unknown to the model and scores as always wrong\n";
  }
  const ConfusionCounts counts = ConfusionCounts::from_pairs(golds, predictions);
  const Prf macro = prf(counts, Average::Macro);
  const Prf micro = prf(counts, Average::Micro);
  MetricsRow row;
  row.macro_p = macro.precision;
  row.macro_r = macro.recall;
  row.macro_f = macro.f1;
  row.micro_p = micro.precision;
  row.accuracy = accuracy(predictions, golds);
  return row;
}

namespace {

EmbeddingTable words_for_corpus(const Dataset& ds, const std::string& embeddings_path, int dim,
                                std::uint64_t seed) {
  if (!embeddings_path.empty()) return load_text_embeddings(embeddings_path);
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  for (const auto& inst : ds.instances)
    for (const auto& t : inst.tokens)
      if (seen.insert(t.surface).second) vocab.push_back(t.surface);
  return EmbeddingTable::random_table(EmbeddingTable::Kind::Word, vocab, dim,
                                      mix64(seed, 0x3077ull));
}

TrainConfig config_for(const PresetSpec& preset, TrainConfig base, std::uint64_t seed) {
  base.preset = preset.name;
  base.use_lstm = preset.use_lstm;
  base.use_word_loss = preset.use_word_loss;
  base.update_entity_vectors = preset.update_entity_vectors;
  base.update_word_vectors = preset.update_word_vectors;
  base.seed = seed;
  return base;
}

void parallel_for(int n_jobs, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || n_jobs <= 1) {
    for (int i = 0; i < n_jobs; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, n_jobs);
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<MetricsRow> run_experiment(const RunOptions& options) {
  const PresetSpec preset = resolve_preset(options.preset);
  const Dataset ds = load_corpus(options.corpus_path);
  const EmbeddingTable words =
      words_for_corpus(ds, options.embeddings_path, options.base_config.dim, options.seed);

  TrainConfig cfg = config_for(preset, options.base_config, options.seed);
  cfg.dim = words.dim;

  const auto parts = split(ds, {0.7, 0.1, 0.2}, options.seed, /*stratified=*/true);
  const Dataset& train = parts[0];
  const Dataset& val = parts[1];
  const Dataset& test = parts[2];

  const EmbeddingTable entities = init_entity_vectors(ds, words);

  Checkpoint base;
  base.dim = words.dim;
  base.config = cfg;
  base.words = words;
  base.entities = entities;
  base.label_vocab = train.label_vocab;
  if (preset.pretrain) {
    const LstmParams lstm_init = LstmParams::seeded_init(words.dim, mix64(options.seed, 1));
    base = pretrain(train, cfg, words, entities, lstm_init).checkpoint;
  } else if (preset.use_lstm) {
    base.lstm = LstmParams::seeded_init(words.dim, mix64(options.seed, 1));
  } else {
    base.lstm = LstmParams::zeros(words.dim);
  }

  const std::vector<std::size_t> sizes = doubling_schedule(train.size());

  // nested, seed-shuffled subsets
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 subset_rng(mix64(options.seed, 2));
  std::shuffle(order.begin(), order.end(), subset_rng);

  std::vector<std::string> test_golds;
  test_golds.reserve(test.size());
  for (const auto& inst : test.instances) test_golds.push_back(inst.relation);

  std::vector<MetricsRow> rows(sizes.size());
  std::vector<Checkpoint> models(sizes.size());
  parallel_for(static_cast<int>(sizes.size()), options.threads, [&](int k) {
    Dataset subset;
    for (std::size_t i = 0; i < sizes[k]; ++i) subset.instances.push_back(train.instances[order[i]]);
    subset.rebuild_vocab();

    TrainConfig cfg_k = cfg;
    cfg_k.seed = mix64(options.seed, 100 + static_cast<std::uint64_t>(k));
    const FinetuneResult ft = finetune(subset, val, cfg_k, base);

    MetricsRow row =
        score_predictions(test_golds, predict(ft.checkpoint, test), ft.checkpoint.label_vocab);
    row.experiment = preset.name;
    row.train_size = sizes[k];
    row.seed = options.seed;
    rows[k] = std::move(row);
    models[k] = std::move(ft.checkpoint);
  });

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    const std::filesystem::path dir(options.out_dir);
    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw std::runtime_error("cannot write metrics.csv in " + options.out_dir);
    csv << metrics_csv_header() << "\n";
    for (const auto& row : rows) csv << metrics_csv_line(row) << "\n";
    save_checkpoint(models.back(), (dir / "model_final.json").string());
  }
  return rows;
}

std::vector<Eigen::VectorXd> root_representations(const Checkpoint& model, const Dataset& ds) {
  std::vector<Eigen::VectorXd> reps;
  reps.reserve(ds.size());
  for (const auto& inst : ds.instances) reps.push_back(root_representation(model, inst));
  return reps;
}

namespace {

Dataset merge_datasets(const Dataset& a, const Dataset& b) {
  Dataset out;
  out.instances = a.instances;
  out.instances.insert(out.instances.end(), b.instances.begin(), b.instances.end());
  out.rebuild_vocab();
  return out;
}

}  // namespace

std::vector<TuneRow> tune(const TuneOptions& options) {
  if (options.mode != "pretrain" && options.mode != "finetune")
    throw std::invalid_argument("tune mode must be 'pretrain' or 'finetune'");

  std::ifstream in(options.grid_path);
  if (!in) throw std::runtime_error("cannot open grid file: " + options.grid_path);
  nlohmann::json grid_json;
  try {
    in >> grid_json;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(options.grid_path + ": malformed grid: " + e.what());
  }
  if (!grid_json.is_object() || grid_json.empty())
    throw std::invalid_argument("grid file must be a nonempty JSON object");

  std::vector<std::string> keys;
  std::vector<std::vector<double>> values;
  for (const auto& [key, arr] : grid_json.items()) {
    if (!arr.is_array() || arr.empty())
      throw std::invalid_argument("grid entry '" + key + "' must be a nonempty array");
    keys.push_back(key);
    values.push_back(arr.get<std::vector<double>>());
  }

  std::size_t n_points = 1;
  for (const auto& v : values) n_points *= v.size();

  const Dataset ds = load_corpus(options.corpus_path);
  const EmbeddingTable words =
      words_for_corpus(ds, options.embeddings_path, options.base_config.dim, options.seed);
  const EmbeddingTable entities = init_entity_vectors(ds, words);

  const bool pretrain_mode = options.mode == "pretrain";
  // pre-training tunes on a 3/4 + 1/4 split, fine-tuning on the full protocol
  const auto parts = split(ds, pretrain_mode ? std::array<double, 3>{0.75, 0.125, 0.125}
                                             : std::array<double, 3>{0.7, 0.1, 0.2},
                           options.seed, /*stratified=*/true);
  const Dataset& train = parts[0];
  const Dataset held_out = pretrain_mode ? merge_datasets(parts[1], parts[2]) : parts[1];
  const Dataset& test = pretrain_mode ? held_out : parts[2];

  std::vector<TuneRow> rows(n_points);
  parallel_for(static_cast<int>(n_points), options.threads, [&](int point) {
    TrainConfig cfg = options.base_config;
    cfg.seed = options.seed;
    cfg.dim = words.dim;
    cfg.use_lstm = true;

    TuneRow row;
    std::size_t rem = static_cast<std::size_t>(point);
    for (std::size_t kidx = 0; kidx < keys.size(); ++kidx) {
      const double v = values[kidx][rem % values[kidx].size()];
      rem /= values[kidx].size();
      char num[64];
      std::snprintf(num, sizeof(num), "%.17g", v);
      apply_config_kv(cfg, keys[kidx], num);
      row.values.emplace_back(keys[kidx], v);
    }

    if (pretrain_mode) {
      const LstmParams init = LstmParams::seeded_init(words.dim, mix64(options.seed, 1));
      const Checkpoint model = pretrain(train, cfg, words, entities, init).checkpoint;
      const auto reps = root_representations(model, held_out);
      const int k_clusters = static_cast<int>(ds.label_vocab.size());
      const Partition clusters =
          kmeans(reps, k_clusters, mix64(options.seed, 3), /*max_iter=*/100);
      Partition gold;
      gold.reserve(held_out.size());
      for (const auto& inst : held_out.instances) gold.push_back(ds.label_index(inst.relation));
      row.rand_index = rand_index(clusters, gold);
      row.metric = row.rand_index;
    } else {
      Checkpoint base;
      base.dim = words.dim;
      base.config = cfg;
      base.lstm = LstmParams::seeded_init(words.dim, mix64(options.seed, 1));
      base.words = words;
      base.entities = entities;
      const FinetuneResult ft = finetune(train, held_out, cfg, base);
      std::vector<std::string> golds;
      for (const auto& inst : test.instances) golds.push_back(inst.relation);
      const MetricsRow m =
          score_predictions(golds, predict(ft.checkpoint, test), ft.checkpoint.label_vocab);
      row.macro_p = m.macro_p;
      row.macro_r = m.macro_r;
      row.macro_f = m.macro_f;
      row.accuracy = m.accuracy;
      row.metric = m.accuracy;
    }
    rows[point] = std::move(row);
  });

  std::stable_sort(rows.begin(), rows.end(),
                   [](const TuneRow& a, const TuneRow& b) { return a.metric > b.metric; });
  return rows;
}

}  // namespace relex
