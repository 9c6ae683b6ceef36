#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "f3/graphsampler/adjacency.hpp"
#include "f3/graphsampler/posterior.hpp"
#include "f3/graphsampler/reference.hpp"
#include "f3/graphsampler/relaxation.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/gradcheck.hpp"
#include "f3/numcore/ops.hpp"
#include "oracles.hpp"

using f3::Matrix;
using f3::ReferenceDistribution;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }
double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Pr(z <= t): z <= t iff s >= F^-1(theta) - tau logit(t).
double icdf_cdf_normal_oracle(double t, double theta, double tau) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return 1 - oracle::normal_cdf(oracle::normal_quantile(theta) - tau * logit(t));
}

double icdf_cdf_uniform_oracle(double t, double theta, double tau) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return 1 - std::clamp(theta - tau * logit(t), 0.0, 1.0);
}

// g1 - g2 is standard logistic.
double gumbel_cdf_oracle(double t, double theta, double tau) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return sig(tau * logit(t) - logit(theta));
}

}  // namespace

TEST(Reference, NormalQuantileAgreesWithBisection) {
  const auto ref = ReferenceDistribution::normal();
  for (double p : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.999}) {
    EXPECT_NEAR(ref.inverse_cdf(p), oracle::normal_quantile(p), 1e-9) << p;
    EXPECT_NEAR(ref.inverse_cdf_from_logit(logit(p)), oracle::normal_quantile(p), 1e-9) << p;
  }
}

TEST(Reference, PdfDerivativeMatchesFiniteDifference) {
  for (const auto& ref : {ReferenceDistribution::normal(), ReferenceDistribution::normal(2.0),
                          ReferenceDistribution::logistic()}) {
    for (double x : {-1.3, -0.2, 0.0, 0.9}) {
      const double h = 1e-5;
      EXPECT_NEAR(ref.pdf_derivative(x), (ref.pdf(x + h) - ref.pdf(x - h)) / (2 * h), 1e-7);
      EXPECT_NEAR(ref.pdf(x), (ref.cdf(x + h) - ref.cdf(x - h)) / (2 * h), 1e-7);
    }
  }
}

TEST(IcdfCdf, HalfIsOneMinusTheta) {
  for (const auto& ref : {ReferenceDistribution::normal(), ReferenceDistribution::uniform(),
                          ReferenceDistribution::logistic()})
    for (double theta : {0.1, 0.5, 0.83})
      for (double tau : {0.05, 1.0, 3.0}) EXPECT_NEAR(f3::icdf_cdf(0.5, theta, tau, ref), 1 - theta, 1e-14);
}

TEST(IcdfCdf, MatchesIndependentFormula) {
  for (double theta : {0.25, 0.5, 0.75})
    for (double tau : {0.1, 0.5, 1.0})
      for (int k = 0; k <= 200; ++k) {
        const double t = k / 200.0;
        EXPECT_NEAR(f3::icdf_cdf(t, theta, tau, ReferenceDistribution::normal()),
                    icdf_cdf_normal_oracle(t, theta, tau), 1e-9);
        EXPECT_NEAR(f3::icdf_cdf(t, theta, tau, ReferenceDistribution::uniform()),
                    icdf_cdf_uniform_oracle(t, theta, tau), 1e-12);
      }
}

TEST(IcdfCdf, UniformReferenceBoundaryBranches) {
  const auto u = ReferenceDistribution::uniform();
  // sigmoid(-5) ~ 0.00669 is the lowest reachable z at theta 0.5, tau 0.1.
  EXPECT_EQ(f3::icdf_cdf(0.005, 0.5, 0.1, u), 0.0);
  EXPECT_EQ(f3::icdf_cdf(0.995, 0.5, 0.1, u), 1.0);
  EXPECT_GT(f3::icdf_cdf(0.007, 0.5, 0.1, u), 0.0);
}

TEST(IcdfCdf, MatchesEmpiricalCdf) {
  const auto ref = ReferenceDistribution::normal();
  f3::DrawStream s(17, 0);
  std::vector<double> z(100000);
  for (double& v : z) v = f3::icdf_sample(0.3, 0.5, ref, s);
  std::sort(z.begin(), z.end());
  double sup = 0;
  for (int k = 1; k < 1000; ++k) {
    const double t = k / 1000.0;
    const double emp = static_cast<double>(std::upper_bound(z.begin(), z.end(), t) - z.begin()) / z.size();
    sup = std::max(sup, std::abs(emp - f3::icdf_cdf(t, 0.3, 0.5, ref)));
  }
  EXPECT_LT(sup, 0.01);
}

TEST(GumbelCdf, ClosedFormAndSpecialCases) {
  for (double theta : {0.2, 0.5, 0.9})
    for (double tau : {0.1, 1.0})
      for (int k = 0; k <= 100; ++k) {
        const double t = k / 100.0;
        EXPECT_NEAR(f3::gumbel_cdf(t, theta, tau), gumbel_cdf_oracle(t, theta, tau), 1e-12);
      }
  EXPECT_NEAR(f3::gumbel_cdf(0.5, 0.3, 0.7), 0.7, 1e-15);
  const double t = 0.3, tau = 0.4;
  EXPECT_NEAR(f3::gumbel_cdf(t, 0.5, tau),
              std::pow(t, tau) / (std::pow(t, tau) + std::pow(1 - t, tau)), 1e-14);
}

TEST(Cdf, NondecreasingOnFineGrid) {
  for (double theta : {0.25, 0.5, 0.75})
    for (double tau : {0.1, 1.0}) {
      double pi = 0, pu = 0, pg = 0;
      for (int k = 0; k <= 1000; ++k) {
        const double t = k / 1000.0;
        const double ci = f3::icdf_cdf(t, theta, tau, ReferenceDistribution::normal());
        const double cu = f3::icdf_cdf(t, theta, tau, ReferenceDistribution::uniform());
        const double cg = f3::gumbel_cdf(t, theta, tau);
        EXPECT_GE(ci, pi);
        EXPECT_GE(cu, pu);
        EXPECT_GE(cg, pg);
        pi = ci, pu = cu, pg = cg;
      }
    }
}

TEST(Sampler, DrawCountsAreOneAndTwo) {
  f3::DrawStream a(1, 0), b(1, 1);
  for (int i = 0; i < 1000; ++i) {
    f3::icdf_sample(0.4, 0.5, ReferenceDistribution::normal(), a);
    f3::gumbel_sample(0.4, 0.5, b);
  }
  EXPECT_EQ(a.draws(), 1000u);
  EXPECT_EQ(b.draws(), 2000u);
}

TEST(Sampler, LogitSamplesAgreeWithZSamples) {
  f3::DrawStream a(3, 0), b(3, 0), c(3, 1), d(3, 1);
  for (int i = 0; i < 200; ++i) {
    EXPECT_DOUBLE_EQ(sig(f3::icdf_sample_logit(0.3, 0.2, ReferenceDistribution::normal(), a)),
                     f3::icdf_sample(0.3, 0.2, ReferenceDistribution::normal(), b));
    EXPECT_NEAR(sig(f3::gumbel_sample_logit(0.3, 0.2, c)), f3::gumbel_sample(0.3, 0.2, d), 1e-15);
  }
}

TEST(Sampler, GumbelSymmetricAtHalfAndSharpAtLowTau) {
  f3::DrawStream s(5, 0);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) mean += f3::gumbel_sample(0.5, 0.7, s);
  EXPECT_NEAR(mean / 100000, 0.5, 0.005);
  int above = 0;
  for (int i = 0; i < 100000; ++i) above += f3::gumbel_sample(0.8, 0.01, s) > 0.5;
  EXPECT_NEAR(above / 1e5, 0.8, 0.012);
}

TEST(Sampler, RejectsBadArguments) {
  f3::DrawStream s(1, 0);
  EXPECT_THROW(f3::icdf_sample(0.0, 0.5, ReferenceDistribution::normal(), s), f3::ContractError);
  EXPECT_THROW(f3::icdf_sample(0.5, 0.0, ReferenceDistribution::normal(), s), f3::ContractError);
  EXPECT_THROW(f3::gumbel_sample(1.0, 0.5, s), f3::ContractError);
}

TEST(Sampler, IcdfDerivativeMatchesFiniteDifference) {
  const auto ref = ReferenceDistribution::normal();
  for (double theta : {0.2, 0.5, 0.7})
    for (double s : {-0.4, 0.3}) {
      const double h = 1e-6;
      const double fd = (f3::icdf_relax(theta + h, 0.3, s, ref) - f3::icdf_relax(theta - h, 0.3, s, ref)) / (2 * h);
      EXPECT_NEAR(f3::icdf_relax_dtheta(theta, 0.3, s, ref), fd, 1e-6);
    }
}

TEST(Bias, AnalyticLeadingTerms) {
  EXPECT_NEAR(f3::analytic_bias(0.25, 0.1, f3::BiasMethod::gumbel),
              0.01 * std::numbers::pi * std::numbers::pi * 0.25 * 0.75 * 0.5 / 6, 1e-15);
  EXPECT_NEAR(f3::analytic_bias(0.25, 0.1, f3::BiasMethod::gumbel), 1.542e-3, 1e-6);
  EXPECT_EQ(f3::analytic_bias(0.5, 0.3, f3::BiasMethod::gumbel), 0.0);
  EXPECT_NEAR(f3::analytic_bias(0.5, 0.3, f3::BiasMethod::icdf_normal), 0.0, 1e-16);
  // (pi^2/6) tau^2 F''(x), F'' = -x phi(x) for the standard normal.
  const double x = oracle::normal_quantile(0.2);
  const double want = std::numbers::pi * std::numbers::pi / 6 * 0.01 * (-x) *
                      std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi);
  EXPECT_NEAR(f3::analytic_bias(0.2, 0.1, f3::BiasMethod::icdf_normal), want, 1e-12);
  EXPECT_NEAR(f3::icdf_bias_leading_term(0.2, 0.1, ReferenceDistribution::normal()), want, 1e-12);
}

TEST(Bias, SignFollowsThetaAndVanishesAtHalf) {
  for (auto method : {f3::SamplerKind::icdf, f3::SamplerKind::gumbel}) {
    const auto lo = f3::empirical_bias(0.25, 0.2, method, 1000000, 3);
    EXPECT_GT(lo.bias, 3 * lo.std_error);
    const auto hi = f3::empirical_bias(0.75, 0.2, method, 1000000, 3);
    EXPECT_LT(hi.bias, -3 * hi.std_error);
    const auto mid = f3::empirical_bias(0.5, 0.2, method, 1000000, 3);
    EXPECT_LE(std::abs(mid.bias), 3 * mid.std_error);
  }
}

TEST(Bias, PairedEstimatorAgreesWithSampleMean) {
  const auto a = f3::empirical_bias(0.3, 0.3, f3::SamplerKind::icdf, 400000, 9);
  const auto b = f3::empirical_bias(0.3, 0.3, f3::SamplerKind::icdf, 400000, 9, f3::BiasEstimator::paired_hard);
  EXPECT_LT(b.std_error, a.std_error);
  EXPECT_LT(std::abs(a.bias - b.bias), 3 * a.std_error);
  EXPECT_THROW(f3::empirical_bias(0.3, 0.3, f3::SamplerKind::icdf, 999, 9), f3::ContractError);
}

TEST(Adjacency, NormalizationHandCases) {
  EXPECT_LT(f3::max_abs_diff(f3::normalize_adjacency(Matrix(3, 3)), Matrix::identity(3)), 1e-15);
  EXPECT_LT(f3::max_abs_diff(f3::normalize_adjacency(Matrix::identity(3)), Matrix::identity(3)), 1e-15);
  // All ones: A + I has 2 on the diagonal, degree 4.
  const Matrix n = f3::normalize_adjacency(Matrix(3, 3, 1.0));
  EXPECT_NEAR(n(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(n(0, 1), 0.25, 1e-15);
}

TEST(Adjacency, NormalizationGradient) {
  std::mt19937_64 g(4);
  const std::vector<Matrix> params{oracle::random_matrix(4, 4, g, 0.05, 0.95)};
  const Matrix w = oracle::random_matrix(4, 4, g);
  const f3::ScalarFn f = [&](f3::Tape& t, std::span<const f3::Var> p) {
    return f3::sum(f3::hadamard(f3::normalize_adjacency(p[0]), t.constant(w)));
  };
  EXPECT_TRUE(f3::grad_check(f, params, 1e-4).passed);
}

TEST(Posterior, SymmetricDrawCountAndMirror) {
  f3::GraphPosterior gp = f3::GraphPosterior::uninformative(6, {}, 1);
  EXPECT_EQ(gp.edges().size(), 15u);
  const auto noise = gp.draw_noise(1, 0);
  EXPECT_EQ(gp.draws(), 15u);
  const Matrix a = gp.relaxed_adjacency(gp.logits(), noise);
  EXPECT_EQ(a, f3::transpose(a));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a(i, i), 0.0);

  f3::PosteriorOptions go;
  go.method = f3::SamplerKind::gumbel;
  f3::GraphPosterior gg = f3::GraphPosterior::uninformative(6, go, 1);
  gg.draw_noise(1, 0);
  EXPECT_EQ(gg.draws(), 2 * gp.draws());
}

TEST(Posterior, MedianNoiseGivesHalfEdgesAtHalfTheta) {
  f3::GraphPosterior gp(5, {});
  EXPECT_EQ(gp.median_noise().uniforms.size(), gp.edges().size());
  const Matrix a = gp.relaxed_adjacency(gp.logits(), gp.median_noise());
  for (auto [i, j] : gp.edges()) EXPECT_NEAR(a(i, j), 0.5, 1e-15);
  EXPECT_EQ(gp.draws(), 0u);
}

TEST(Posterior, LowTemperatureSamplesAreNearlyHard) {
  f3::PosteriorOptions o;
  o.tau = 1e-3;
  f3::GraphPosterior gp(8, o);
  std::mt19937_64 g(2);
  std::bernoulli_distribution coin(0.5);
  Matrix want(8, 8);
  for (auto [i, j] : gp.edges()) {
    const bool on = coin(g);
    gp.logits()(i, j) = gp.logits()(j, i) = logit(on ? 0.999 : 0.001);
    want(i, j) = want(j, i) = on;
  }
  int far = 0, total = 0;
  for (std::uint64_t step = 0; step < 50; ++step) {
    const Matrix a = gp.relaxed_adjacency(gp.logits(), gp.draw_noise(4, step));
    for (auto [i, j] : gp.edges()) {
      far += std::abs(a(i, j) - 0.5) < 0.49;
      ++total;
    }
  }
  // Occasional flips still land near 0 or 1.
  EXPECT_EQ(far, 0) << "of " << total;
}

TEST(Posterior, NoiseIsKeyedBySeedAndStep) {
  const f3::GraphPosterior gp(5, {});
  EXPECT_EQ(gp.draw_noise(3, 7).uniforms, gp.draw_noise(3, 7).uniforms);
  EXPECT_NE(gp.draw_noise(3, 7).uniforms, gp.draw_noise(3, 8).uniforms);
  EXPECT_NE(gp.draw_noise(3, 7).uniforms, gp.draw_noise(3, 7, 1).uniforms);
}

TEST(Posterior, RelaxedAdjacencyGradientMatchesFiniteDifferences) {
  for (auto method : {f3::SamplerKind::icdf, f3::SamplerKind::gumbel}) {
    f3::PosteriorOptions o;
    o.method = method;
    o.tau = 0.7;
    f3::GraphPosterior gp = f3::GraphPosterior::uninformative(4, o, 5, 1.0);
    const auto noise = gp.draw_noise(5, 0);
    std::mt19937_64 g(6);
    const Matrix w = oracle::random_matrix(4, 4, g);
    const f3::ScalarFn f = [&](f3::Tape& t, std::span<const f3::Var> p) {
      return f3::sum(f3::hadamard(gp.sample_graph(p[0], noise), t.constant(w)));
    };
    EXPECT_TRUE(f3::grad_check(f, std::vector<Matrix>{gp.logits()}, 1e-4).passed) << f3::to_string(method);
  }
}
