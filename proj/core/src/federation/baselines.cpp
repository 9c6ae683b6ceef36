// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "f3/federation/metrics.hpp"
#include "f3/graphsampler/adjacency.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

std::vector<std::size_t> votes_for(const std::vector<std::vector<int>>& predicted, std::size_t k,
                                   std::size_t classes) {
  std::vector<std::size_t> votes(classes, 0);
  for (const auto& client : predicted) {
    const int p = client[k];
    if (p < 0) continue;
    if (static_cast<std::size_t>(p) >= classes) throw IndexError("vote for class " + std::to_string(p) + " out of range");
    ++votes[static_cast<std::size_t>(p)];
  }
  return votes;
}

std::size_t sample_count(const std::vector<std::vector<int>>& predicted) {
  if (predicted.empty()) throw ContractError("no clients");
  return predicted[0].size();
}

}  // namespace

std::vector<int> majority_vote(const std::vector<std::vector<int>>& predicted, std::size_t classes) {
  const std::size_t m = sample_count(predicted);
  std::vector<int> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto votes = votes_for(predicted, k, classes);
    const auto best = std::max_element(votes.begin(), votes.end());  // first max = lowest class
    if (*best == 0) throw DegenerateSampleError("sample " + std::to_string(k) + " has no present client");
    out[k] = static_cast<int>(best - votes.begin());
  }
  return out;
}

Matrix vote_shares(const std::vector<std::vector<int>>& predicted, std::size_t classes) {
  const std::size_t m = sample_count(predicted);
  Matrix out(m, classes);
  for (std::size_t k = 0; k < m; ++k) {
    const auto votes = votes_for(predicted, k, classes);
    const double total = static_cast<double>(std::accumulate(votes.begin(), votes.end(), std::size_t{0}));
    if (total == 0.0) throw DegenerateSampleError("sample " + std::to_string(k) + " has no present client");
    for (std::size_t c = 0; c < classes; ++c) out(k, c) = static_cast<double>(votes[c]) / total;
  }
  return out;
}

BestModelChoice best_model_selection(const LocalPredictions& lp, std::span<const int> labels,
                                     std::span<const std::size_t> val_ids) {
  if (val_ids.empty()) throw ContractError("best_model_selection: empty validation split");
  BestModelChoice choice;
  for (const auto& pred : lp.predicted) {
    std::vector<int> truth, guess;
    for (std::size_t k : val_ids) {
      if (pred[k] < 0) continue;
      truth.push_back(labels[k]);
      guess.push_back(pred[k]);
    }
    choice.val_f1.push_back(truth.empty() ? 0.0 : macro_f1(truth, guess, lp.classes));
  }
  choice.ranking.resize(lp.predicted.size());
  std::iota(choice.ranking.begin(), choice.ranking.end(), std::size_t{0});
  std::stable_sort(choice.ranking.begin(), choice.ranking.end(), [&](std::size_t a, std::size_t b) {
    return choice.val_f1[a] > choice.val_f1[b];
  });
  choice.client = choice.ranking.front();
  return choice;
}

std::pair<std::vector<int>, Matrix> best_model_outputs(const LocalPredictions& lp,
                                                       const BestModelChoice& choice,
                                                       std::span<const std::size_t> ids) {
  std::vector<int> pred(ids.size());
  Matrix probs(ids.size(), lp.classes);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::size_t k = ids[r];
    bool found = false;
    for (std::size_t c : choice.ranking) {
      if (lp.predicted[c][k] < 0) continue;
      pred[r] = lp.predicted[c][k];
      const auto src = lp.probs[c].row_span(k);
      std::copy(src.begin(), src.end(), probs.row_span(r).begin());
      found = true;
      break;
    }
    if (!found) throw DegenerateSampleError("sample " + std::to_string(k) + " has no present client");
  }
  return {std::move(pred), std::move(probs)};
}

std::vector<double> entropy_diagnostic(const std::vector<std::vector<int>>& predicted,
                                       std::size_t classes) {
  const std::size_t m = sample_count(predicted);
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto votes = votes_for(predicted, k, classes);
    const double total = static_cast<double>(std::accumulate(votes.begin(), votes.end(), std::size_t{0}));
    if (total == 0.0) throw DegenerateSampleError("sample " + std::to_string(k) + " has no present client");
    double h = 0.0;
    for (std::size_t v : votes) {
      if (v == 0) continue;
      const double p = static_cast<double>(v) / total;
      h -= p * std::log(p);
    }
    out[k] = h;
  }
  return out;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double lo, double hi,
                                    std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw ContractError("histogram: need bins > 0 and hi > lo");
  std::vector<HistogramBin> out(bins);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].left = lo + w * static_cast<double>(b);
    out[b].right = b + 1 == bins ? hi : lo + w * static_cast<double>(b + 1);
  }
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / w);
    ++out[std::min(b, bins - 1)].count;
  }
  return out;
}

std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::string out = "bin_left,bin_right,count\n";
  char buf[96];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", b.left, b.right, b.count);
    out += buf;
  }
  return out;
}

Matrix knn_adjacency(const Matrix& features, std::size_t kappa) {
  const std::size_t n = features.rows();
  if (kappa >= n) {
    throw ContractError("knn graph: kappa (" + std::to_string(kappa) + ") must be below the node count (" +
                        std::to_string(n) + ")");
  }
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : features.row_span(i)) s += v * v;
    norm[i] = std::sqrt(s);
  }
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      const auto a = features.row_span(i), b = features.row_span(j);
      for (std::size_t f = 0; f < a.size(); ++f) dot += a[f] * b[f];
      const double denom = norm[i] * norm[j];
      sim(i, j) = denom > 0.0 ? dot / denom : 0.0;
    }
  }
  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::stable_sort(others.begin(), others.end(),
                     [&](std::size_t a, std::size_t b) { return sim(i, a) > sim(i, b); });
    for (std::size_t r = 0; r < kappa; ++r) adj(i, others[r]) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) adj(i, j) = std::max(adj(i, j), adj(j, i));
  return adj;
}

Matrix knn_graph(const RepresentationBundle& bundle, std::size_t kappa,
                 std::span<const std::size_t> ids, std::uint64_t seed, std::size_t width) {
  const std::size_t n = bundle.clients(), d = bundle.latent_dim();
  if (kappa >= n) {
    throw ContractError("knn graph: kappa (" + std::to_string(kappa) + ") must be below the client count (" +
                        std::to_string(n) + ")");
  }
  const CounterRng rng(hash_keys(seed, 0x4a4a));
  auto init = [&](std::size_t rows, std::size_t cols, std::uint64_t stream) {
    const double a = 1.0 / std::sqrt(static_cast<double>(rows));
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = a * (2.0 * rng.uniform(stream, k) - 1.0);
    return m;
  };
  const Matrix W1 = init(d, width, 1), W2 = init(width, width, 2);

  Matrix features(n, ids.size() * width);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix proj = matmul(elementwise(UnaryOp::relu, matmul(select_rows(bundle.latents[i], ids), W1)), W2);
    std::copy(proj.values().begin(), proj.values().end(), features.row_span(i).begin());
  }
  return normalize_adjacency(knn_adjacency(features, kappa));
}

}  // namespace f3
