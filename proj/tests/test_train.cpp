#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "relex/corpus.hpp"
#include "relex/eval.hpp"
#include "relex/experiment.hpp"
#include "relex/train.hpp"
#include "relex/util.hpp"
#include "test_helpers.hpp"

using namespace relex;
using relex::testing::temp_path;

namespace {

Eigen::VectorXd make_vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

TrainConfig fast_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.max_epochs = 5;
  cfg.k = 3;
  return cfg;
}

Checkpoint base_model(const Dataset& ds, const TrainConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  for (const auto& inst : ds.instances)
    for (const auto& t : inst.tokens)
      if (seen.insert(t.surface).second) vocab.push_back(t.surface);
  Checkpoint base;
  base.dim = cfg.dim;
  base.config = cfg;
  base.words = EmbeddingTable::random_table(EmbeddingTable::Kind::Word, vocab, cfg.dim, seed);
  base.entities = init_entity_vectors(ds, base.words);
  base.lstm = LstmParams::seeded_init(cfg.dim, seed + 1);
  base.label_vocab = ds.label_vocab;
  return base;
}

}  // namespace

TEST_CASE("trilinear score") {
  CHECK(trilinear_score(make_vec({1, 2}), make_vec({1, 1}), make_vec({1, 1})) == 3.0);
  CHECK(trilinear_score(make_vec({4, 5}), make_vec({0, 0}), make_vec({6, 7})) == 0.0);
  CHECK_THROWS_AS(trilinear_score(make_vec({1}), make_vec({1, 2}), make_vec({1, 2})),
                  std::invalid_argument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd a(5), f(5), b(5);
  for (int i = 0; i < 5; ++i) {
    a[i] = u(rng);
    f[i] = u(rng);
    b[i] = u(rng);
  }
  std::vector<int> perm = {3, 0, 4, 1, 2};
  Eigen::VectorXd ap(5), fp(5), bp(5);
  for (int i = 0; i < 5; ++i) {
    ap[i] = a[perm[i]];
    fp[i] = f[perm[i]];
    bp[i] = b[perm[i]];
  }
  CHECK(trilinear_score(a, f, b) == doctest::Approx(trilinear_score(ap, fp, bp)));
}

TEST_CASE("entity loss closed forms") {
  const int k = 2;
  const Eigen::VectorXd ei = make_vec({0.3, -0.7}), ej = make_vec({1.1, 0.4});
  const std::vector<Eigen::VectorXd> negs(k, make_vec({0.5, 0.5}));

  SUBCASE("zero representation collapses every score") {
    const EntityLoss el = entity_loss(ei, ej, make_vec({0, 0}), negs, negs);
    CHECK(el.objective == doctest::Approx((1 + 2 * k) * std::log(0.5)));
  }
  SUBCASE("positive-term f gradient at f = 0 with no negatives") {
    const EntityLoss el = entity_loss(ei, ej, make_vec({0, 0}), {}, {});
    CHECK(el.g_f[0] == doctest::Approx(0.5 * ei[0] * ej[0]));
    CHECK(el.g_f[1] == doctest::Approx(0.5 * ei[1] * ej[1]));
  }
  SUBCASE("hand-computed two-dimensional case") {
    const Eigen::VectorXd e1 = make_vec({1, 0}), e2 = make_vec({1, 0}), f = make_vec({2, 0});
    const std::vector<Eigen::VectorXd> zero = {make_vec({0, 0})};
    const EntityLoss el = entity_loss(e1, e2, f, zero, zero);
    CHECK(el.objective == doctest::Approx(log_sigmoid(2.0) + 2 * std::log(0.5)));
  }
}

TEST_CASE("word loss closed forms") {
  const int d = 3;
  SUBCASE("zero node representation") {
    const int k = 2;
    std::vector<Eigen::VectorXd> ctx = {make_vec({1, 2, 3}), make_vec({-1, 0, 1})};
    std::vector<std::vector<Eigen::VectorXd>> negs(
        2, std::vector<Eigen::VectorXd>(k, make_vec({2, 2, 2})));
    const WordLoss wl = word_loss(Eigen::VectorXd::Zero(d), ctx, negs);
    CHECK(wl.objective == doctest::Approx(2 * (1 + k) * std::log(0.5)));
  }
  SUBCASE("single context word without negatives") {
    const Eigen::VectorXd h = make_vec({0.4, -0.2, 0.1});
    const Eigen::VectorXd vc = make_vec({1.0, 2.0, -1.0});
    const WordLoss wl = word_loss(h, {vc}, {{}});
    CHECK(wl.objective == doctest::Approx(log_sigmoid(h.dot(vc))));
  }
  SUBCASE("empty context gives zero loss and gradients") {
    const WordLoss wl = word_loss(make_vec({1, 1, 1}), {}, {});
    CHECK(wl.objective == 0.0);
    CHECK(wl.g_h.norm() == 0.0);
  }
}

TEST_CASE("classify: uniform at zero weights, normalized, scalar margin") {
  ClassifierParams c = ClassifierParams::zeros(3, 4, 2);
  SparseVector sv;
  sv.dimension = 4;
  sv.indices = {1, 3};
  const Classification out = classify(c, sv, make_vec({0.5, -0.5}));
  CHECK(out.label == 0);
  for (int i = 0; i < 3; ++i) CHECK(out.probabilities[i] == doctest::Approx(1.0 / 3));
  CHECK(std::abs(out.probabilities.sum() - 1.0) < 1e-12);

  // two labels, one active feature, logit margin 2
  ClassifierParams two = ClassifierParams::zeros(2, 1, 1);
  two.W(0, 0) = 2.0;
  SparseVector active;
  active.dimension = 1;
  active.indices = {0};
  const Classification margin = classify(two, active, make_vec({0.0}));
  CHECK(margin.probabilities[0] == doctest::Approx(sigmoid(2.0)));
  CHECK(margin.probabilities[0] == doctest::Approx(0.88079707797788));
  CHECK(margin.label == 0);
}

TEST_CASE("adagrad step arithmetic and conventions") {
  SUBCASE("effective rate is alpha over root of accumulated square") {
    Eigen::VectorXd param = make_vec({1.0});
    Eigen::VectorXd state = make_vec({0.0});
    adagrad_step(param, make_vec({2.0}), state, 0.1, 0.0, Reg::L2);
    CHECK(state[0] == doctest::Approx(4.0));
    const double rate = (1.0 - param[0]) / 2.0;
    CHECK(rate == doctest::Approx(0.05).epsilon(1e-6));
  }
  SUBCASE("lambda zero is plain adagrad for either penalty") {
    Eigen::VectorXd pa = make_vec({0.5}), pb = make_vec({0.5});
    Eigen::VectorXd sa = make_vec({0.0}), sb = make_vec({0.0});
    adagrad_step(pa, make_vec({1.0}), sa, 0.1, 0.0, Reg::L1);
    adagrad_step(pb, make_vec({1.0}), sb, 0.1, 0.0, Reg::L2);
    CHECK(pa[0] == pb[0]);
  }
  SUBCASE("L1 leaves an exact zero in place under zero gradient") {
    Eigen::VectorXd param = make_vec({0.0});
    Eigen::VectorXd state = make_vec({0.0});
    adagrad_step(param, make_vec({0.0}), state, 0.1, 1.0, Reg::L1);
    CHECK(param[0] == 0.0);
  }
  SUBCASE("effective rates never increase") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2, 2);
    Eigen::VectorXd param = make_vec({0.3});
    Eigen::VectorXd state = make_vec({0.0});
    double prev_rate = 1e300;
    for (int step = 0; step < 20; ++step) {
      double g = u(rng);
      if (std::abs(g) < 0.1) g = 0.1;
      const double before = param[0];
      adagrad_step(param, make_vec({g}), state, 0.1, 0.0, Reg::L2);
      const double rate = std::abs((param[0] - before) / g);
      CHECK(rate <= prev_rate + 1e-12);
      prev_rate = rate;
    }
  }
}

TEST_CASE("early stopping returns the pre-decline epoch") {
  EarlyStopper stopper(1);
  CHECK_FALSE(stopper.observe(0.5));
  CHECK_FALSE(stopper.observe(0.6));
  CHECK(stopper.observe(0.55));
  CHECK(stopper.best() == 0.6);
  CHECK(stopper.best_epoch() == 2);

  EarlyStopper patient(2);
  CHECK_FALSE(patient.observe(0.5));
  CHECK_FALSE(patient.observe(0.45));
  CHECK(patient.observe(0.44));
}

TEST_CASE("pretrain over zero instances returns the initialization") {
  const TrainConfig cfg = fast_config();
  Dataset empty;
  const EmbeddingTable words =
      EmbeddingTable::random_table(EmbeddingTable::Kind::Word, {"a", "b"}, cfg.dim, 3);
  const EmbeddingTable entities =
      EmbeddingTable::random_table(EmbeddingTable::Kind::Entity, {"e1"}, cfg.dim, 4);
  const LstmParams init = LstmParams::seeded_init(cfg.dim, 5);
  const PretrainResult r = pretrain(empty, cfg, words, entities, init);
  CHECK(r.checkpoint.lstm.flatten() == init.flatten());
  CHECK(r.checkpoint.words.vectors == words.vectors);
  CHECK(r.checkpoint.entities.vectors == entities.vectors);
}

TEST_CASE("pretrain raises the mean entity objective") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Dataset ds = synth_corpus(60, 3, 100 + seed);
    TrainConfig cfg = fast_config();
    cfg.seed = seed;
    cfg.update_entity_vectors = true;
    const Checkpoint base = base_model(ds, cfg, seed);
    const PretrainResult r = pretrain(ds, cfg, base.words, base.entities, base.lstm);
    REQUIRE(r.epoch_objective.size() == 5);
    INFO("seed ", seed, " first ", r.epoch_objective.front(), " last ", r.epoch_objective.back());
    CHECK(r.epoch_objective.back() > r.epoch_objective.front());
  }
}

TEST_CASE("pretrain honours the update flags") {
  const Dataset ds = synth_corpus(40, 3, 9);
  TrainConfig cfg = fast_config();
  cfg.max_epochs = 2;
  const Checkpoint base = base_model(ds, cfg, 17);

  // M-E-L semantics: only the LSTM moves
  const PretrainResult frozen = pretrain(ds, cfg, base.words, base.entities, base.lstm);
  CHECK(frozen.checkpoint.words.vectors == base.words.vectors);
  CHECK(frozen.checkpoint.entities.vectors == base.entities.vectors);
  CHECK(frozen.checkpoint.lstm.flatten() != base.lstm.flatten());

  TrainConfig lue = cfg;
  lue.update_entity_vectors = true;
  const PretrainResult moved = pretrain(ds, lue, base.words, base.entities, base.lstm);
  CHECK(moved.checkpoint.entities.vectors != base.entities.vectors);
  CHECK(moved.checkpoint.words.vectors == base.words.vectors);
}

TEST_CASE("finetune learns a separable problem and is deterministic") {
  const Dataset ds = synth_corpus(80, 3, 77);
  TrainConfig cfg = fast_config();
  cfg.use_lstm = false;
  cfg.max_epochs = 20;
  cfg.patience = 20;
  const Checkpoint base = base_model(ds, cfg, 21);

  const FinetuneResult a = finetune(ds, ds, cfg, base);
  CHECK(a.train_accuracy == doctest::Approx(1.0));

  const FinetuneResult b = finetune(ds, ds, cfg, base);
  REQUIRE(a.checkpoint.classifier.has_value());
  CHECK(a.checkpoint.classifier->W == b.checkpoint.classifier->W);
  CHECK(predict(a.checkpoint, ds) == predict(b.checkpoint, ds));
}

TEST_CASE("B-HL runs end to end with a random LSTM") {
  const Dataset ds = synth_corpus(60, 3, 55);
  const auto parts = split(ds, {0.7, 0.15, 0.15}, 5, true);
  TrainConfig cfg = fast_config();
  cfg.max_epochs = 3;
  const Checkpoint base = base_model(ds, cfg, 23);
  const FinetuneResult r = finetune(parts[0], parts[1], cfg, base);
  CHECK(std::isfinite(r.train_accuracy));
  CHECK(r.train_accuracy > 0.0);
  for (double acc : r.val_accuracy) CHECK(std::isfinite(acc));
}

TEST_CASE("large L1 drives classifier weights toward sparsity") {
  const Dataset ds = synth_corpus(100, 3, 91);
  TrainConfig cfg = fast_config();
  cfg.use_lstm = false;
  cfg.max_epochs = 8;
  cfg.patience = 8;
  const Checkpoint base = base_model(ds, cfg, 31);

  TrainConfig l1 = cfg;
  l1.lambda_fc = 1.0;
  l1.reg_finetune = Reg::L1;
  TrainConfig no_reg = cfg;
  no_reg.lambda_fc = 0.0;

  const auto count_big = [](const ClassifierParams& c) {
    return (c.W.array().abs() > 1e-3).count();
  };
  const FinetuneResult sparse = finetune(ds, ds, l1, base);
  const FinetuneResult dense = finetune(ds, ds, no_reg, base);
  CHECK(count_big(*sparse.checkpoint.classifier) < count_big(*dense.checkpoint.classifier));
}

TEST_CASE("checkpoint save/load round-trips predictions and config") {
  const Dataset ds = synth_corpus(50, 3, 41);
  const auto parts = split(ds, {0.7, 0.15, 0.15}, 3, true);
  TrainConfig cfg = fast_config();
  cfg.max_epochs = 3;
  cfg.update_entity_vectors = true;
  cfg.preset = "M-E-LUE";
  const Checkpoint base = base_model(ds, cfg, 87);
  const PretrainResult pre = pretrain(parts[0], cfg, base.words, base.entities, base.lstm);
  const FinetuneResult ft = finetune(parts[0], parts[1], cfg, pre.checkpoint);

  const auto path = temp_path("ckpt.json").string();
  save_checkpoint(ft.checkpoint, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.version == "relex-model-v1");
  CHECK(back.config.preset == "M-E-LUE");
  CHECK(back.lstm.flatten() == ft.checkpoint.lstm.flatten());
  CHECK(predict(back, ds) == predict(ft.checkpoint, ds));
}

TEST_CASE("config text format round-trips") {
  TrainConfig cfg;
  cfg.alpha_fc = 0.05;
  cfg.lambda_fc = 1e-7;
  cfg.k = 7;
  cfg.use_word_loss = true;
  cfg.finetune_update_vectors = 1;
  cfg.reg_finetune = Reg::L2;
  cfg.preset = "M-EW-LUEW";
  cfg.seed = 123456789;
  const auto path = temp_path("config.txt").string();
  save_config(cfg, path);
  const TrainConfig back = load_config(path);
  CHECK(back.alpha_fc == cfg.alpha_fc);
  CHECK(back.lambda_fc == cfg.lambda_fc);
  CHECK(back.k == cfg.k);
  CHECK(back.use_word_loss == cfg.use_word_loss);
  CHECK(back.finetune_update_vectors == 1);
  CHECK(back.reg_finetune == Reg::L2);
  CHECK(back.preset == cfg.preset);
  CHECK(back.seed == cfg.seed);

  CHECK_THROWS_AS(apply_config_kv(cfg, "nonsense", "1"), std::invalid_argument);
}

TEST_CASE("evaluating on the training data reproduces the logged accuracy") {
  const Dataset ds = synth_corpus(60, 3, 19);
  TrainConfig cfg = fast_config();
  cfg.use_lstm = false;
  cfg.max_epochs = 5;
  const Checkpoint base = base_model(ds, cfg, 3);
  const FinetuneResult r = finetune(ds, ds, cfg, base);
  std::vector<std::string> golds;
  for (const auto& inst : ds.instances) golds.push_back(inst.relation);
  const double acc = accuracy(predict(r.checkpoint, ds), golds);
  CHECK(acc >= r.train_accuracy - 1e-12);
}
