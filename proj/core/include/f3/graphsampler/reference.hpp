// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace f3 {

enum class ReferenceKind { standard_normal, uniform01, logistic };

std::string_view to_string(ReferenceKind kind);
ReferenceKind reference_kind_from_string(std::string_view name);

/// Continuous reference distribution F used by the ICDF relaxation.
///
/// `sigma` scales the normal kind only (N(0, sigma^2)); the uniform kind is
/// supported on [0, 1] and the logistic kind is the standard logistic.
class ReferenceDistribution {
 public:
  ReferenceDistribution() = default;
  explicit ReferenceDistribution(ReferenceKind kind, double sigma = 1.0);

  static ReferenceDistribution normal(double sigma = 1.0) {
    return ReferenceDistribution(ReferenceKind::standard_normal, sigma);
  }
  static ReferenceDistribution uniform() { return ReferenceDistribution(ReferenceKind::uniform01); }
  static ReferenceDistribution logistic() {
    return ReferenceDistribution(ReferenceKind::logistic);
  }

  ReferenceKind kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }

  /// Support bounds; +-infinity for unbounded kinds.
  double lower() const noexcept;
  double upper() const noexcept;
  bool bounded() const noexcept { return kind_ == ReferenceKind::uniform01; }

  double cdf(double x) const;
  /// F^{-1}(p) for p in (0, 1).
  double inverse_cdf(double p) const;
  /// F^{-1}(sigmoid(logit)) without forming p near 0 or 1.
  double inverse_cdf_from_logit(double logit) const;
  /// F'(x).
  double pdf(double x) const;
  /// F''(x), the quantity governing the leading ICDF bias term.
  double pdf_derivative(double x) const;

  std::string describe() const;

  bool operator==(const ReferenceDistribution&) const = default;

 private:
  ReferenceKind kind_ = ReferenceKind::standard_normal;
  double sigma_ = 1.0;
};

}  // namespace f3
