// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "f3/graphsampler/reference.hpp"
#include "f3/numcore/rng.hpp"

// Scalar relaxations of a Bernoulli(theta) draw and their closed-form laws.

namespace f3 {

enum class SamplerKind { icdf, gumbel };

std::string_view to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(std::string_view name);

/// Reference-distribution draws consumed per relaxed Bernoulli sample.
constexpr int draws_per_sample(SamplerKind kind) noexcept {
  return kind == SamplerKind::icdf ? 1 : 2;
}

/// z = sigmoid((F^{-1}(theta) - s) / tau) for a given reference draw s.
double icdf_relax(double theta, double tau, double s, const ReferenceDistribution& ref);

/// dz/dtheta at fixed s.
double icdf_relax_dtheta(double theta, double tau, double s, const ReferenceDistribution& ref);

/// One relaxed sample; consumes exactly one uniform from `stream`, turned into
/// s by inverse-transform sampling. ContractError unless tau > 0 and theta in (0,1).
double icdf_sample(double theta, double tau, const ReferenceDistribution& ref, DrawStream& stream);

/// y_1 of softmax((log pi + g) / tau) with pi = [theta, 1 - theta], for given
/// Gumbel(0,1) draws g1, g2.
double gumbel_relax(double theta, double tau, double g1, double g2);

/// Standard Gumbel variate from a uniform in (0,1).
double gumbel_from_uniform(double u);

/// One relaxed sample; consumes exactly two uniforms from `stream`.
double gumbel_sample(double theta, double tau, DrawStream& stream);

/// The same draws on the logit scale, w = logit(z). Near 0 and 1, z rounds to
/// the endpoints long before w stops being resolvable; sigmoid(w) is exactly
/// what the z-samplers return for the same stream.
double icdf_sample_logit(double theta, double tau, const ReferenceDistribution& ref, DrawStream& stream);
double gumbel_sample_logit(double theta, double tau, DrawStream& stream);

/// Pr(logit z <= w) for each relaxation.
double icdf_cdf_logit(double w, double theta, double tau, const ReferenceDistribution& ref);
double gumbel_cdf_logit(double w, double theta, double tau);

/// Pr(z <= t) for the ICDF relaxation, including the finite-support branches.
double icdf_cdf(double t, double theta, double tau, const ReferenceDistribution& ref);

/// Pr(y_1 <= t) for the Gumbel-softmax relaxation.
double gumbel_cdf(double t, double theta, double tau);

enum class BiasMethod { icdf_normal, gumbel };

std::string_view to_string(BiasMethod method);

/// Leading O(tau^2) term of E[x] - theta. The normal case uses the
/// inverse-error-function form with the default sigma = 1 unless `sigma` is given.
double analytic_bias(double theta, double tau, BiasMethod method, double sigma = 1.0);

/// (pi^2 / 6) tau^2 F''(F^{-1}(theta)) for an arbitrary reference.
double icdf_bias_leading_term(double theta, double tau, const ReferenceDistribution& ref);

enum class BiasEstimator {
  /// mean(x) - theta.
  sample_mean,
  /// mean(x - b) where b is the hard Bernoulli obtained from the same draws
  /// in the tau -> 0 limit (E[b] = theta exactly). Same expectation, far
  /// smaller variance when tau is small.
  paired_hard,
};

struct BiasEstimate {
  double bias = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t draws = 0;
};

/// Monte-Carlo estimate of E[x] - theta. Requires samples >= 10^4.
BiasEstimate empirical_bias(double theta, double tau, SamplerKind method, std::uint64_t samples,
                            std::uint64_t seed,
                            BiasEstimator estimator = BiasEstimator::sample_mean,
                            const ReferenceDistribution& ref = ReferenceDistribution::normal());

}  // namespace f3
