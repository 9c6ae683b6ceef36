// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/alignment/sinkhorn.hpp"
#include "f3/graphsampler/reference.hpp"
#include "f3/graphsampler/relaxation.hpp"

// Numerical checks of the sampler laws, Sinkhorn convergence, latent
// permutation invariance and end-to-end gradients. Each suite returns raw
// measurements; callers decide what passes.

namespace f3 {

// ---- relaxation CDF ----

struct CdfCase {
  SamplerKind method = SamplerKind::icdf;
  ReferenceKind reference = ReferenceKind::standard_normal;  // ignored for gumbel
  double theta = 0.0;
  double tau = 0.0;
  std::uint64_t samples = 0;
  /// sup_t |analytic(t) - empirical(t)|, exact over all sample points.
  double sup_norm = 0.0;
  /// max |z - sigmoid(w)| between the z-sampler and the logit-scale draws.
  double sampler_mismatch = 0.0;
  /// Bounded references only: support [lo, hi] of z and whether the analytic
  /// CDF is exactly 0 below it and 1 above it.
  bool bounded = false;
  double support_lo = 0.0;
  double support_hi = 1.0;
  bool boundary_ok = true;
};

struct CdfRow {
  SamplerKind method = SamplerKind::icdf;
  ReferenceKind reference = ReferenceKind::standard_normal;
  double theta = 0.0, tau = 0.0, t = 0.0, analytic = 0.0, empirical = 0.0;
};

struct CdfSuite {
  std::vector<CdfCase> cases;
  std::vector<CdfRow> rows;  // grid of t for plotting
  std::string csv() const;
  double worst() const;
};

struct CdfSuiteOptions {
  std::vector<double> thetas{0.25, 0.5, 0.75};
  std::vector<double> taus{0.1, 0.5, 1.0};
  std::vector<ReferenceKind> references{ReferenceKind::standard_normal, ReferenceKind::uniform01};
  std::vector<SamplerKind> methods{SamplerKind::icdf, SamplerKind::gumbel};
  std::uint64_t samples = 100000;
  std::size_t grid = 101;
  std::uint64_t seed = 1;
};

/// ICDF cases run once per reference; Gumbel cases once per (theta, tau).
CdfSuite cdf_suite(const CdfSuiteOptions& opt = {});

// ---- relaxation bias ----

struct BiasRow {
  SamplerKind method = SamplerKind::icdf;
  double theta = 0.0, tau = 0.0;
  double analytic = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

struct RateFit {
  SamplerKind method = SamplerKind::icdf;
  double theta = 0.0;
  double slope = 0.0;  // of log |empirical bias| against log tau
};

struct BiasSuite {
  std::vector<BiasRow> rows;
  std::vector<RateFit> fits;
  std::string csv() const;
  const BiasRow* find(SamplerKind method, double theta, double tau) const;
};

struct BiasSuiteOptions {
  std::vector<double> thetas{0.2, 0.35};
  std::vector<double> taus{0.2, 0.1, 0.05, 0.025};
  std::vector<SamplerKind> methods{SamplerKind::icdf, SamplerKind::gumbel};
  std::uint64_t samples = 10000000;
  std::uint64_t seed = 2;
  BiasEstimator estimator = BiasEstimator::paired_hard;
  /// Fit the log-log slope (needs at least two taus).
  bool fit_rate = true;
  std::size_t threads = 1;
};

BiasSuite bias_suite(const BiasSuiteOptions& opt = {});

/// Least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- Sinkhorn ----

struct SinkhornCase {
  std::string name;
  SinkhornDiagnostics diagnostics;
  DecayFit fit;
  double mean_ratio = 0.0;
  /// First iteration whose residual is below 1e-8; -1 if none.
  int first_below_1e8 = -1;
};

struct SinkhornSuite {
  std::vector<SinkhornCase> cases;
  std::string csv() const;
};

struct SinkhornSuiteOptions {
  std::size_t n = 16;
  std::size_t iterations = 50;
  /// Entries of the random kernel are exp(spread * N(0, 1)).
  double spread = 1.5;
  /// Near-permutation kernel: P + epsilon * U(0, 1).
  double epsilon = 1e-4;
  std::size_t slow_iterations = 200;
  std::uint64_t seed = 3;
};

SinkhornSuite sinkhorn_suite(const SinkhornSuiteOptions& opt = {});

// ---- latent permutation invariance ----

struct PermutationSuite {
  std::size_t trials = 0;
  double max_prob_diff = 0.0;    // head outputs, permuted vs original
  double max_latent_diff = 0.0;  // h' vs h[p]
};

PermutationSuite permutation_suite(std::size_t trials = 100, std::uint64_t seed = 4);

// ---- end-to-end gradient ----

struct GradientSuite {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
  std::size_t entries = 0;
};

/// Full objective on a toy: 4 clients (FC and GRU latents as given), 8 samples,
/// 2 classes, soft alignment, ICDF-sampled graph with frozen noise.
GradientSuite gradient_suite(std::uint64_t seed = 5);

nlohmann::json to_json(const CdfSuite& s);
nlohmann::json to_json(const BiasSuite& s);
nlohmann::json to_json(const SinkhornSuite& s);
nlohmann::json to_json(const PermutationSuite& s);
nlohmann::json to_json(const GradientSuite& s);

}  // namespace f3
