// SPDX-License-Identifier: Apache-2.0
#include "f3/graphsampler/relaxation.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"

namespace f3 {

namespace {

void require_args(double theta, double tau) {
  if (!(tau > 0.0)) throw ContractError("relaxed sampler: tau must be > 0");
  if (!(theta > 0.0 && theta < 1.0)) {
    throw ContractError("relaxed sampler: theta must lie in (0, 1)");
  }
}

}  // namespace

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::icdf ? "icdf" : "gumbel";
}

SamplerKind sampler_kind_from_string(std::string_view name) {
  if (name == "icdf") return SamplerKind::icdf;
  if (name == "gumbel") return SamplerKind::gumbel;
  throw ValidationError("unknown sampler '" + std::string(name) + "'");
}

std::string_view to_string(BiasMethod method) {
  return method == BiasMethod::icdf_normal ? "icdf_normal" : "gumbel";
}

double icdf_relax(double theta, double tau, double s, const ReferenceDistribution& ref) {
  require_args(theta, tau);
  return sigmoid((ref.inverse_cdf(theta) - s) / tau);
}

double icdf_relax_dtheta(double theta, double tau, double s, const ReferenceDistribution& ref) {
  require_args(theta, tau);
  const double q = ref.inverse_cdf(theta);
  const double z = sigmoid((q - s) / tau);
  return z * (1.0 - z) / (tau * ref.pdf(q));
}

double icdf_sample_logit(double theta, double tau, const ReferenceDistribution& ref,
                         DrawStream& stream) {
  require_args(theta, tau);
  const double s = ref.inverse_cdf(stream.next_uniform());
  return (ref.inverse_cdf(theta) - s) / tau;
}

double icdf_sample(double theta, double tau, const ReferenceDistribution& ref,
                   DrawStream& stream) {
  return sigmoid(icdf_sample_logit(theta, tau, ref, stream));
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

double gumbel_relax(double theta, double tau, double g1, double g2) {
  require_args(theta, tau);
  return sigmoid((std::log(theta) - std::log1p(-theta) + g1 - g2) / tau);
}

double gumbel_sample_logit(double theta, double tau, DrawStream& stream) {
  require_args(theta, tau);
  const double g1 = gumbel_from_uniform(stream.next_uniform());
  const double g2 = gumbel_from_uniform(stream.next_uniform());
  return (std::log(theta) - std::log1p(-theta) + g1 - g2) / tau;
}

double gumbel_sample(double theta, double tau, DrawStream& stream) {
  return sigmoid(gumbel_sample_logit(theta, tau, stream));
}

double icdf_cdf_logit(double w, double theta, double tau, const ReferenceDistribution& ref) {
  require_args(theta, tau);
  // w <= x  <=>  s >= F^{-1}(theta) - tau x; bounded references clamp on their own.
  return 1.0 - ref.cdf(ref.inverse_cdf(theta) - tau * w);
}

double gumbel_cdf_logit(double w, double theta, double tau) {
  require_args(theta, tau);
  return sigmoid(tau * w - (std::log(theta) - std::log1p(-theta)));
}

double icdf_cdf(double t, double theta, double tau, const ReferenceDistribution& ref) {
  require_args(theta, tau);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double q = ref.inverse_cdf(theta);
  if (std::isfinite(ref.upper()) && t < sigmoid((q - ref.upper()) / tau)) return 0.0;
  if (std::isfinite(ref.lower()) && t > sigmoid((q - ref.lower()) / tau)) return 1.0;
  return 1.0 - ref.cdf(q + tau * std::log(1.0 / t - 1.0));
}

double gumbel_cdf(double t, double theta, double tau) {
  require_args(theta, tau);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::pow(t, tau) * (1.0 - theta);
  const double b = std::pow(1.0 - t, tau) * theta;
  return a / (a + b);
}

double analytic_bias(double theta, double tau, BiasMethod method, double sigma) {
  require_args(theta, tau);
  constexpr double pi = std::numbers::pi;
  if (method == BiasMethod::gumbel) {
    return tau * tau * pi * pi * theta * (1.0 - theta) * (1.0 - 2.0 * theta) / 6.0;
  }
  const double u = boost::math::erf_inv(2.0 * theta - 1.0);
  return -tau * tau * std::pow(pi, 1.5) * u * std::exp(-u * u) / (6.0 * sigma * sigma);
}

double icdf_bias_leading_term(double theta, double tau, const ReferenceDistribution& ref) {
  require_args(theta, tau);
  constexpr double pi = std::numbers::pi;
  return pi * pi / 6.0 * tau * tau * ref.pdf_derivative(ref.inverse_cdf(theta));
}

BiasEstimate empirical_bias(double theta, double tau, SamplerKind method, std::uint64_t samples,
                            std::uint64_t seed, BiasEstimator estimator,
                            const ReferenceDistribution& ref) {
  require_args(theta, tau);
  if (samples < 10000) throw ContractError("empirical_bias: need at least 10^4 samples");

  DrawStream stream(seed, 0);
  const double q = ref.inverse_cdf(theta);
  const double l = std::log(theta) - std::log1p(-theta);
  const bool paired = estimator == BiasEstimator::paired_hard;

  double total = 0.0;
  double total_sq = 0.0;
  for (std::uint64_t k = 0; k < samples; ++k) {
    double x = 0.0;
    if (method == SamplerKind::icdf) {
      const double s = ref.inverse_cdf(stream.next_uniform());
      x = sigmoid((q - s) / tau);
      if (paired) x -= (s < q) ? 1.0 : 0.0;
    } else {
      const double g1 = gumbel_from_uniform(stream.next_uniform());
      const double g2 = gumbel_from_uniform(stream.next_uniform());
      const double v = l + g1 - g2;
      x = sigmoid(v / tau);
      if (paired) x -= (v > 0.0) ? 1.0 : 0.0;
    }
    total += x;
    total_sq += x * x;
  }
  const auto n = static_cast<double>(samples);
  const double mean = total / n;
  const double var = std::max(0.0, (total_sq - n * mean * mean) / (n - 1.0));

  BiasEstimate out;
  out.bias = paired ? mean : mean - theta;
  out.std_error = std::sqrt(var / n);
  out.samples = samples;
  out.draws = stream.draws();
  return out;
}

}  // namespace f3
