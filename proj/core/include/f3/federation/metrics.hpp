// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "f3/numcore/matrix.hpp"

namespace f3 {

/// C x C counts, rows = true class, cols = predicted class.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth,
                                                       std::span<const int> predicted,
                                                       std::size_t classes);

/// Unweighted mean of per-class F1; a class with no true and no predicted
/// members scores 0.
double macro_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

/// Area under the ROC curve of `scores` for positives vs the rest, via the
/// rank-sum statistic with average ranks for ties. NaN without both groups.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

/// Mean one-vs-rest AUC over classes that have both positives and negatives;
/// NaN if none do. `scores` is samples x classes.
double macro_auc(std::span<const int> truth, const Matrix& scores);

}  // namespace f3
