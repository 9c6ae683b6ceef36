// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "f3/numcore/errors.hpp"

namespace f3 {

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth,
                                                       std::span<const int> predicted,
                                                       std::size_t classes) {
  if (truth.size() != predicted.size()) throw ShapeError("confusion_matrix: length mismatch");
  std::vector<std::vector<std::size_t>> cm(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto t = static_cast<std::size_t>(truth[k]);
    const auto p = static_cast<std::size_t>(predicted[k]);
    if (truth[k] < 0 || predicted[k] < 0 || t >= classes || p >= classes) {
      throw IndexError("confusion_matrix: class index out of range at sample " + std::to_string(k));
    }
    ++cm[t][p];
  }
  return cm;
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  const auto cm = confusion_matrix(truth, predicted, classes);
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      fp += cm[o][c];
      fn += cm[c][o];
    }
    const double denom = 2.0 * static_cast<double>(cm[c][c]) + static_cast<double>(fp + fn);
    total += denom > 0.0 ? 2.0 * static_cast<double>(cm[c][c]) / denom : 0.0;
  }
  return total / static_cast<double>(classes);
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw ShapeError("binary_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double macro_auc(std::span<const int> truth, const Matrix& scores) {
  if (scores.rows() != truth.size()) throw ShapeError("macro_auc: " + scores.shape_str() + " scores for " + std::to_string(truth.size()) + " labels");
  double total = 0.0;
  std::size_t defined = 0;
  std::vector<double> col(truth.size());
  std::vector<std::uint8_t> pos(truth.size());
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    for (std::size_t k = 0; k < truth.size(); ++k) {
      col[k] = scores(k, c);
      pos[k] = truth[k] == static_cast<int>(c);
    }
    const double auc = binary_auc(col, pos);
    if (!std::isnan(auc)) {
      total += auc;
      ++defined;
    }
  }
  return defined ? total / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace f3
