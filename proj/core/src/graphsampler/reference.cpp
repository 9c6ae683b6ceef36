// SPDX-License-Identifier: Apache-2.0
#include "f3/graphsampler/reference.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"

namespace f3 {

namespace {

using NoPromote = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

void require_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("inverse_cdf: probability must lie in (0, 1), got " + std::to_string(p));
  }
}

}  // namespace

std::string_view to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::standard_normal: return "normal";
    case ReferenceKind::uniform01: return "uniform";
    case ReferenceKind::logistic: return "logistic";
  }
  return "?";
}

ReferenceKind reference_kind_from_string(std::string_view name) {
  if (name == "normal" || name == "standard_normal") return ReferenceKind::standard_normal;
  if (name == "uniform" || name == "uniform01") return ReferenceKind::uniform01;
  if (name == "logistic") return ReferenceKind::logistic;
  throw ValidationError("unknown reference distribution '" + std::string(name) + "'");
}

ReferenceDistribution::ReferenceDistribution(ReferenceKind kind, double sigma)
    : kind_(kind), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ContractError("ReferenceDistribution: sigma must be positive and finite");
  }
}

double ReferenceDistribution::lower() const noexcept {
  return kind_ == ReferenceKind::uniform01 ? 0.0 : -std::numeric_limits<double>::infinity();
}

double ReferenceDistribution::upper() const noexcept {
  return kind_ == ReferenceKind::uniform01 ? 1.0 : std::numeric_limits<double>::infinity();
}

double ReferenceDistribution::cdf(double x) const {
  switch (kind_) {
    case ReferenceKind::standard_normal: return 0.5 * std::erfc(-x / (sigma_ * kSqrt2));
    case ReferenceKind::uniform01: return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x);
    case ReferenceKind::logistic: return sigmoid(x);
  }
  return 0.0;
}

double ReferenceDistribution::inverse_cdf(double p) const {
  require_probability(p);
  switch (kind_) {
    case ReferenceKind::standard_normal:
      if (p <= 0.5) return -sigma_ * kSqrt2 * boost::math::erfc_inv(2.0 * p, NoPromote());
      return sigma_ * kSqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p), NoPromote());
    case ReferenceKind::uniform01: return p;
    case ReferenceKind::logistic: return logit(p);
  }
  return 0.0;
}

double ReferenceDistribution::inverse_cdf_from_logit(double l) const {
  switch (kind_) {
    case ReferenceKind::standard_normal:
      if (l <= 0.0) return -sigma_ * kSqrt2 * boost::math::erfc_inv(2.0 * sigmoid(l), NoPromote());
      return sigma_ * kSqrt2 * boost::math::erfc_inv(2.0 * sigmoid(-l), NoPromote());
    case ReferenceKind::uniform01: return sigmoid(l);
    case ReferenceKind::logistic: return l;
  }
  return 0.0;
}

double ReferenceDistribution::pdf(double x) const {
  switch (kind_) {
    case ReferenceKind::standard_normal: {
      const double u = x / sigma_;
      return kInvSqrt2Pi * std::exp(-0.5 * u * u) / sigma_;
    }
    case ReferenceKind::uniform01: return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
    case ReferenceKind::logistic: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

double ReferenceDistribution::pdf_derivative(double x) const {
  switch (kind_) {
    case ReferenceKind::standard_normal: return -x / (sigma_ * sigma_) * pdf(x);
    case ReferenceKind::uniform01: return 0.0;
    case ReferenceKind::logistic: {
      const double s = sigmoid(x);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
  }
  return 0.0;
}

std::string ReferenceDistribution::describe() const {
  std::string out(to_string(kind_));
  if (kind_ == ReferenceKind::standard_normal && sigma_ != 1.0) {
    out += "(sigma=" + std::to_string(sigma_) + ")";
  }
  return out;
}

}  // namespace f3
