#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "f3/globalmodel/global_model.hpp"
#include "f3/federation/bundle.hpp"
#include "f3/graphsampler/adjacency.hpp"
#include "f3/localmodels/client.hpp"
#include "f3/synthdata/dataset.hpp"
#include "f3/numcore/adam.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/gradcheck.hpp"
#include "f3/numcore/ops.hpp"
#include "oracles.hpp"

using f3::Matrix;

namespace {

f3::GlobalModel make(f3::GlobalModelConfig cfg, std::size_t clients, std::size_t d,
                     f3::AlignmentMode mode = f3::AlignmentMode::none, std::uint64_t seed = 1) {
  return f3::GlobalModel::create(cfg, f3::AlignmentSet::create(mode, clients, d, d, seed), seed);
}

std::vector<Matrix> random_latents(std::size_t clients, std::size_t m, std::size_t d, std::mt19937_64& g) {
  std::vector<Matrix> h;
  for (std::size_t i = 0; i < clients; ++i) h.push_back(oracle::random_matrix(m, d, g));
  return h;
}

Matrix softmax_row(std::vector<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double& v : z) s += (v = std::exp(v - mx));
  Matrix out(1, z.size());
  for (std::size_t c = 0; c < z.size(); ++c) out(0, c) = z[c] / s;
  return out;
}

}  // namespace

TEST(GlobalModel, MeanPoolMatchesScalarLoop) {
  std::mt19937_64 g(1);
  f3::GlobalModelConfig cfg;
  cfg.variant = f3::GlobalVariant::mean_pool;
  cfg.hidden = 5;
  cfg.classes = 3;
  cfg.graph = f3::GraphMode::none;
  auto gm = make(cfg, 4, 6);
  gm.b0 = oracle::random_matrix(1, 5, g);
  gm.b1 = oracle::random_matrix(1, 3, g);
  const auto h = random_latents(4, 3, 6, g);
  const Matrix p = f3::global_predict(gm, h);
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> pooled(5, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t k = 0; k < 5; ++k) {
        double a = gm.b0(0, k);
        for (std::size_t j = 0; j < 6; ++j) a += h[i](s, j) * gm.W0(j, k);
        pooled[k] += std::max(0.0, a) / 4;
      }
    std::vector<double> z(3);
    for (std::size_t c = 0; c < 3; ++c) {
      z[c] = gm.b1(0, c);
      for (std::size_t k = 0; k < 5; ++k) z[c] += pooled[k] * gm.W1(k, c);
    }
    const Matrix want = softmax_row(z);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p(s, c), want(0, c), 1e-12);
  }
}

TEST(GlobalModel, GcnWithIdentityGraphEqualsBiasFreeMeanPool) {
  std::mt19937_64 g(2);
  f3::GlobalModelConfig gc;
  gc.graph = f3::GraphMode::given;
  gc.hidden = 4;
  gc.classes = 3;
  auto gcn = make(gc, 5, 3);
  gcn.set_fixed_graph(Matrix::identity(5));
  f3::GlobalModelConfig mc = gc;
  mc.variant = f3::GlobalVariant::mean_pool;
  mc.use_bias = false;
  mc.graph = f3::GraphMode::none;
  auto mp = make(mc, 5, 3);
  mp.W0 = gcn.W0;
  mp.W1 = gcn.W1;
  const auto h = random_latents(5, 7, 3, g);
  EXPECT_LT(f3::max_abs_diff(f3::global_predict(gcn, h), f3::global_predict(mp, h)), 1e-13);

  // Graph mode none is the identity as well.
  f3::GlobalModelConfig nc = gc;
  nc.graph = f3::GraphMode::none;
  auto none = make(nc, 5, 3);
  none.W0 = gcn.W0;
  none.W1 = gcn.W1;
  EXPECT_LT(f3::max_abs_diff(f3::global_predict(none, h), f3::global_predict(gcn, h)), 1e-13);
}

TEST(GlobalModel, GcnMatchesDenseFormula) {
  std::mt19937_64 g(3);
  f3::GlobalModelConfig cfg;
  cfg.graph = f3::GraphMode::given;
  cfg.skip = true;
  cfg.hidden = 4;
  cfg.classes = 2;
  auto gm = make(cfg, 3, 2);
  gm.W_skip = oracle::random_matrix(2, 4, g);
  const Matrix a = f3::normalize_adjacency(Matrix{{0, 1, 0}, {1, 0, 0.5}, {0, 0.5, 0}});
  gm.set_fixed_graph(a);
  const auto h = random_latents(3, 2, 2, g);
  const Matrix p = f3::global_predict(gm, h);
  for (std::size_t s = 0; s < 2; ++s) {
    Matrix hs(3, 2);  // nodes x features for sample s
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) hs(i, j) = h[i](s, j);
    Matrix inner = oracle::matmul(oracle::matmul(a, hs), gm.W0);
    for (std::size_t i = 0; i < inner.size(); ++i) inner[i] = std::max(0.0, inner[i]);
    Matrix node = oracle::matmul(a, inner);
    const Matrix sk = oracle::matmul(hs, gm.W_skip);
    for (std::size_t i = 0; i < node.size(); ++i) node[i] += sk[i];
    std::vector<double> pooled(4, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 4; ++k) pooled[k] += node(i, k) / 3;
    std::vector<double> z(2, 0.0);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 4; ++k) z[c] += pooled[k] * gm.W1(k, c);
    const Matrix want = softmax_row(z);
    EXPECT_NEAR(p(s, 0), want(0, 0), 1e-12);
    EXPECT_NEAR(p(s, 1), want(0, 1), 1e-12);
  }
}

TEST(GlobalModel, AlignmentUndoesPermutedLatents) {
  std::mt19937_64 g(4);
  const std::size_t d = 4, n = 3;
  f3::GlobalModelConfig cfg;
  cfg.graph = f3::GraphMode::none;
  auto plain = make(cfg, n, d);
  auto aligned = make(cfg, n, d, f3::AlignmentMode::soft);
  aligned.W0 = plain.W0;
  aligned.W1 = plain.W1;
  const auto h = random_latents(n, 5, d, g);
  std::vector<Matrix> permuted, inverse;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> p(d);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), g);
    Matrix hp(5, d), pm(d, d);
    for (std::size_t j = 0; j < d; ++j) {
      pm(j, p[j]) = 1;
      for (std::size_t s = 0; s < 5; ++s) hp(s, j) = h[i](s, p[j]);
    }
    permuted.push_back(hp);
    inverse.push_back(f3::transpose(pm));
  }
  aligned.alignment().set_matrices(inverse);
  EXPECT_LT(f3::max_abs_diff(f3::global_predict(aligned, permuted), f3::global_predict(plain, h)), 1e-13);
}

TEST(GlobalModel, ParameterOrderAndRoundTrip) {
  f3::GlobalModelConfig cfg;
  cfg.skip = true;
  auto gm = make(cfg, 4, 3, f3::AlignmentMode::soft);
  const auto params = gm.parameters();
  ASSERT_EQ(params.size(), 3u + 4u + 1u);
  EXPECT_EQ(params[0], &gm.W0);
  EXPECT_EQ(params[1], &gm.W1);
  EXPECT_EQ(params[2], &gm.W_skip);
  EXPECT_EQ(params.back(), &gm.posterior().logits());
  const auto back = f3::GlobalModel::from_json(gm.to_json());
  EXPECT_EQ(back.to_json(), gm.to_json());
}

TEST(GlobalModel, LossGradientMatchesFiniteDifferences) {
  std::mt19937_64 g(6);
  f3::GlobalModelConfig cfg;
  cfg.skip = true;
  cfg.hidden = 3;
  cfg.posterior.tau = 0.5;
  auto gm = make(cfg, 4, 2, f3::AlignmentMode::soft, 3);
  gm.posterior().logits() = oracle::random_matrix(4, 4, g, -1, 1);
  const auto h = random_latents(4, 8, 2, g);
  const std::vector<int> y{0, 1, 1, 0, 1, 0, 0, 1};
  std::vector<Matrix> params;
  for (const Matrix* p : std::as_const(gm).parameters()) params.push_back(*p);
  const f3::ScalarFn f = [&](f3::Tape& t, std::span<const f3::Var> p) {
    std::vector<f3::Var> lat;
    for (const Matrix& m : h) lat.push_back(t.constant(m));
    return f3::f3_loss(gm, p, lat, y, 11, 0);
  };
  const auto report = f3::grad_check(f, params, 1e-4);
  EXPECT_TRUE(report.passed) << report.worst();
}

TEST(GlobalModel, LossRequiresSamples) {
  f3::GlobalModelConfig cfg;
  const auto gm = make(cfg, 2, 2);
  f3::Tape t;
  const auto params = gm.bind(t);
  const std::vector<f3::Var> lat{t.constant(Matrix(0, 2)), t.constant(Matrix(0, 2))};
  EXPECT_THROW(f3::f3_loss(gm, params, lat, std::vector<int>{}, 0, 0), f3::ContractError);
}

// Planted task: pre-trained client latents, 200 Adam steps, median of 5 seeds.
TEST(GlobalModel, TwoHundredStepsCutTheLossByAThird) {
  std::vector<double> ratio;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    f3::SyntheticSpec spec;
    spec.clients = 6;
    spec.samples = 200;
    spec.event_size = 2;
    spec.latent_dim = 8;
    spec.seq_len = 4;
    spec.seed = seed;
    const auto data = f3::generate(spec);
    std::vector<f3::LocalClient> clients;
    for (std::size_t i = 0; i < data.clients(); ++i) {
      clients.push_back(f3::LocalClient::create(i, data.kinds[i], data.input_dims[i], 8, spec.classes,
                                                data.shards[i], seed * 100 + i));
      f3::pretrain_local(clients.back(), data.labels, f3::PretrainConfig{.epochs = 60});
    }
    f3::TransferLog log(data.clients());
    const std::vector<f3::Split> split(data.samples(), f3::Split::train);
    const auto bundle = f3::collect_bundle(clients, data.labels, split, log);

    f3::GlobalModelConfig cfg;
    cfg.classes = spec.classes;
    cfg.skip = true;
    auto gm = make(cfg, data.clients(), 8, f3::AlignmentMode::none, seed);
    f3::Adam opt(f3::AdamConfig{.lr = 0.01});
    auto loss_at = [&](std::uint64_t step, bool update) {
      f3::Tape t;
      const auto params = gm.bind(t);
      std::vector<f3::Var> lat;
      for (const Matrix& m : bundle.latents) lat.push_back(t.constant(m));
      const f3::Var l = f3::f3_loss(gm, params, lat, data.labels, seed, step);
      if (update) {
        t.backward(l);
        std::vector<Matrix> grads;
        for (const auto& p : params) grads.push_back(t.grad(p));
        opt.step(gm.parameters(), grads);
      }
      return l.value()[0];
    };
    const double first = loss_at(0, false);
    for (std::uint64_t step = 0; step < 200; ++step) loss_at(step, true);
    ratio.push_back(loss_at(0, false) / first);
  }
  std::sort(ratio.begin(), ratio.end());
  EXPECT_LE(ratio[2], 0.7);
}

TEST(GlobalModel, ThetaCsvListsEveryEdge) {
  f3::GlobalModelConfig cfg;
  const auto gm = make(cfg, 3, 2);
  const std::string csv = f3::theta_csv(gm);
  EXPECT_EQ(csv.rfind("row,col,theta", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 9);
}
