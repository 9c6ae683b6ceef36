#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "f3/federation/baselines.hpp"
#include "f3/federation/bundle.hpp"
#include "f3/federation/config.hpp"
#include "f3/federation/metrics.hpp"
#include "f3/federation/pipeline.hpp"
#include "f3/federation/trainer.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "oracles.hpp"

using f3::Matrix;
using f3::VariantId;

namespace {

f3::ExperimentConfig small_config() {
  f3::ExperimentConfig c;
  c.dataset.clients = 6;
  c.dataset.samples = 150;
  c.dataset.classes = 3;
  c.dataset.event_size = 2;
  c.dataset.seq_len = 4;
  c.latent_dim = 6;
  c.hidden = 6;
  c.pretrain_epochs = 40;
  c.global.max_epochs = 30;
  c.global.patience = 10;
  c.global.learning_rates = {0.01};
  return c;
}

const f3::MetricsReport& report(const f3::PipelineResult& r, const std::string& label) {
  for (const auto& m : r.reports)
    if (m.variant == label) return m;
  throw std::runtime_error("no report " + label);
}

}  // namespace

TEST(Metrics, MacroF1AndAucMatchIndependentRecomputation) {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 40 + trial, c = 2 + trial % 3;
    std::uniform_int_distribution<int> cls(0, static_cast<int>(c) - 1);
    std::vector<int> y(m), p(m);
    for (std::size_t k = 0; k < m; ++k) y[k] = cls(g), p[k] = cls(g);
    EXPECT_NEAR(f3::macro_f1(y, p, c), oracle::macro_f1(y, p, static_cast<int>(c)), 1e-10);

    Matrix scores = oracle::random_matrix(m, c, g, 0, 1);
    scores(0, 0) = scores(1, 0);  // a tie
    double sum = 0;
    int used = 0;
    for (std::size_t cc = 0; cc < c; ++cc) {
      std::vector<double> s(m);
      std::vector<bool> pos(m);
      bool any_pos = false, any_neg = false;
      for (std::size_t k = 0; k < m; ++k) {
        s[k] = scores(k, cc);
        pos[k] = y[k] == static_cast<int>(cc);
        (pos[k] ? any_pos : any_neg) = true;
      }
      if (any_pos && any_neg) sum += oracle::pairwise_auc(s, pos), ++used;
    }
    EXPECT_NEAR(f3::macro_auc(y, scores), sum / used, 1e-10);
  }
}

TEST(Metrics, ConfusionMatrixAndEdgeCases) {
  const std::vector<int> y{0, 0, 1, 2}, p{0, 1, 1, 1};
  const auto cm = f3::confusion_matrix(y, p, 3);
  EXPECT_EQ(cm[0][0], 1u);
  EXPECT_EQ(cm[0][1], 1u);
  EXPECT_EQ(cm[2][1], 1u);
  // Class 2 has a true member but no hit: F1 0. Perfect prediction: 1.
  EXPECT_DOUBLE_EQ(f3::macro_f1(y, y, 3), 1.0);
  const std::vector<std::uint8_t> one_group{1, 1};
  EXPECT_TRUE(std::isnan(f3::binary_auc(std::vector<double>{0.1, 0.2}, one_group)));
}

TEST(Baselines, MajorityVoteTiesGoToLowestClassAndSkipMissing) {
  const std::vector<std::vector<int>> pred{{2, 1, -1}, {1, 1, 0}, {0, 2, -1}};
  EXPECT_EQ(f3::majority_vote(pred, 3), (std::vector<int>{0, 1, 0}));
  const Matrix shares = f3::vote_shares(pred, 3);
  EXPECT_NEAR(shares(1, 1), 2.0 / 3, 1e-15);
  EXPECT_NEAR(shares(2, 0), 1.0, 1e-15);
  const std::vector<std::vector<int>> none{{-1}, {-1}};
  EXPECT_THROW(f3::majority_vote(none, 2), f3::DegenerateSampleError);
}

TEST(Baselines, BestModelTiesGoToLowerIdAndFallBack) {
  f3::LocalPredictions lp;
  lp.classes = 2;
  lp.predicted = {{0, 1, 0, -1}, {0, 0, 0, 1}, {0, 1, 0, 1}};
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix p(4, 2);
    for (std::size_t k = 0; k < 4; ++k)
      if (lp.predicted[i][k] >= 0) p(k, static_cast<std::size_t>(lp.predicted[i][k])) = 1.0;
    lp.probs.push_back(p);
  }
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<std::size_t> val{0, 1, 2};
  const auto choice = f3::best_model_selection(lp, labels, val);
  EXPECT_EQ(choice.client, 0u);  // clients 0 and 2 tie on validation
  EXPECT_EQ(choice.ranking, (std::vector<std::size_t>{0, 2, 1}));
  const std::vector<std::size_t> test{3};
  const auto [pred, probs] = f3::best_model_outputs(lp, choice, test);
  EXPECT_EQ(pred, std::vector<int>{1});  // client 0 lacks sample 3, client 2 has it
  EXPECT_EQ(probs(0, 1), 1.0);
}

TEST(Baselines, EntropyOfAgreementAndUniformDisagreement) {
  const std::vector<std::vector<int>> pred{{1, 0, 0}, {1, 1, -1}, {1, 2, 0}};
  const auto h = f3::entropy_diagnostic(pred, 3);
  EXPECT_EQ(h[0], 0.0);
  EXPECT_NEAR(h[1], std::log(3.0), 1e-15);
  EXPECT_EQ(h[2], 0.0);
  const auto bins = f3::histogram(h, 0, std::log(3.0), 2);
  EXPECT_EQ(bins[0].count, 2u);
  EXPECT_EQ(bins[1].count, 1u);  // right edge belongs to the last bin
}

TEST(Knn, AdjacencyIsSymmetricBinaryAndCoversKappa) {
  std::mt19937_64 g(2);
  const Matrix f = oracle::random_matrix(9, 5, g);
  for (std::size_t kappa : {1u, 3u, 8u}) {
    const Matrix a = f3::knn_adjacency(f, kappa);
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_EQ(a(i, i), 0.0);
      double deg = 0;
      for (std::size_t j = 0; j < 9; ++j) {
        EXPECT_EQ(a(i, j), a(j, i));
        EXPECT_TRUE(a(i, j) == 0.0 || a(i, j) == 1.0);
        deg += a(i, j);
      }
      EXPECT_GE(deg, static_cast<double>(kappa));
    }
  }
  EXPECT_THROW(f3::knn_adjacency(f, 9), f3::ContractError);
}

TEST(Knn, NearestPeerByCosine) {
  const Matrix f{{1, 0}, {0.9, 0.1}, {0, 1}, {0.1, 1}};
  const Matrix a = f3::knn_adjacency(f, 1);
  EXPECT_EQ(a(0, 1), 1.0);
  EXPECT_EQ(a(2, 3), 1.0);
  EXPECT_EQ(a(0, 2), 0.0);
}

TEST(Trainer, FixedRatesOverrideTheCandidate) {
  Matrix a{{1.0}}, b{{1.0}};
  f3::Trainable t;
  t.params = {&a, &b};
  t.fixed_lr = {std::nullopt, 0.0};
  t.train_loss = [](f3::Tape&, std::span<const f3::Var> v, std::uint64_t) {
    return f3::add(f3::sum(f3::hadamard(v[0], v[0])), f3::sum(f3::hadamard(v[1], v[1])));
  };
  t.val_loss = [&] { return a(0, 0) * a(0, 0) + b(0, 0) * b(0, 0); };
  const auto r = f3::fit(t, f3::EarlyStopping{.max_epochs = 20, .patience = 50, .learning_rates = {0.1}});
  EXPECT_EQ(r.epochs_run, 20);
  EXPECT_LT(a(0, 0), 0.5);
  EXPECT_EQ(b(0, 0), 1.0);
  t.fixed_lr = {0.1};
  EXPECT_THROW(f3::fit(t, f3::EarlyStopping{}), f3::ContractError);
}

TEST(Trainer, KeepsTheBestCandidateAndRestoresItsParameters) {
  Matrix a{{2.0}};
  f3::Trainable t;
  t.params = {&a};
  t.train_loss = [](f3::Tape&, std::span<const f3::Var> v, std::uint64_t) {
    return f3::sum(f3::hadamard(v[0], v[0]));
  };
  t.val_loss = [&] { return a(0, 0) * a(0, 0); };
  const auto r = f3::fit(t, f3::EarlyStopping{.max_epochs = 10, .patience = 3, .learning_rates = {1e-4, 0.3}});
  EXPECT_EQ(r.lr, 0.3);
  EXPECT_DOUBLE_EQ(a(0, 0) * a(0, 0), r.best_val_loss);
}

TEST(Pipeline, TransferCountsAndDrawRatio) {
  auto cfg = small_config();
  cfg.variants = {{VariantId::B_majority}, {VariantId::D_best_model}, {VariantId::E_mean_pool},
                  {VariantId::G_concat},   {VariantId::K_align},      {VariantId::K_align, f3::GraphMode::gumbel},
                  {VariantId::L_vfl_graph_align}};
  cfg.global.max_epochs = 5;
  cfg.global.patience = 100;
  const auto r = f3::run_pipeline(cfg, 0);
  for (const auto& m : r.reports) {
    if (m.variant.starts_with("L_")) {
      EXPECT_GT(m.transfers_in, 0u) << m.variant;
      continue;
    }
    EXPECT_EQ(m.out_per_client, std::vector<std::uint64_t>(6, 1)) << m.variant;
    EXPECT_EQ(m.transfers_in, 0u) << m.variant;
  }
  const auto& icdf = report(r, "K_align");
  const auto& gumbel = report(r, "K_align/gumbel");
  ASSERT_GT(icdf.rng_draws, 0u);
  EXPECT_EQ(gumbel.rng_draws, 2 * icdf.rng_draws);
  // Pre-training touched every client's own shard.
  for (auto bytes : r.pretrain_bytes_read) EXPECT_GT(bytes, 0u);
}

TEST(Pipeline, MeanPoolEqualsGcnWithoutGraphOrAlignment) {
  auto cfg = small_config();
  cfg.skip = false;
  cfg.pool_bias = false;
  cfg.variants = {{VariantId::E_mean_pool}, {VariantId::H_no_align, f3::GraphMode::none}};
  const auto r = f3::run_pipeline(cfg, 1);
  EXPECT_EQ(r.reports[0].f1, r.reports[1].f1);
  EXPECT_EQ(r.reports[0].best_val_loss, r.reports[1].best_val_loss);
}

TEST(Pipeline, VflWithFrozenEncodersEqualsK) {
  auto cfg = small_config();
  cfg.vfl_local_lr = 0.0;
  cfg.variants = {{VariantId::K_align}, {VariantId::L_vfl_graph_align}};
  const auto r = f3::run_pipeline(cfg, 2);
  EXPECT_EQ(r.reports[0].f1, r.reports[1].f1);
  EXPECT_EQ(r.reports[0].auc, r.reports[1].auc);
  EXPECT_EQ(r.reports[0].best_val_loss, r.reports[1].best_val_loss);
}

TEST(Pipeline, DeterministicForSameSeed) {
  auto cfg = small_config();
  cfg.variants = {{VariantId::B_majority}, {VariantId::K_align}, {VariantId::M_vfl_scratch}};
  cfg.threads = 2;
  const auto a = f3::run_pipeline(cfg, 3);
  const auto b = f3::run_pipeline(cfg, 3);
  for (std::size_t k = 0; k < a.reports.size(); ++k)
    EXPECT_EQ(a.reports[k].deterministic_json(), b.reports[k].deterministic_json());
  EXPECT_EQ(a.entropy, b.entropy);
}

TEST(Config, RejectsUnknownKeysAndRoundTrips) {
  auto cfg = small_config();
  cfg.variants = f3::ExperimentConfig::all_variants();
  cfg.sampler.logit_lr = 0.05;
  const auto j = cfg.to_json();
  EXPECT_EQ(f3::ExperimentConfig::from_json(j).to_json(), j);
  auto bad = j;
  bad["model"]["hiden"] = 4;
  EXPECT_THROW(f3::ExperimentConfig::from_json(bad), f3::ValidationError);
  auto neg = j;
  neg["sampler"]["tau"] = -1.0;
  EXPECT_THROW(f3::ExperimentConfig::from_json(neg).validate(), f3::ValidationError);
}
