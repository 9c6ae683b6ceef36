// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "f3/graphsampler/reference.hpp"
#include "f3/graphsampler/relaxation.hpp"
#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

/// Thread-safe tally of reference draws. Copies snapshot the current count.
class DrawCounter {
 public:
  DrawCounter() = default;
  DrawCounter(const DrawCounter& other) noexcept : count_(other.get()) {}
  DrawCounter& operator=(const DrawCounter& other) noexcept {
    count_.store(other.get(), std::memory_order_relaxed);
    return *this;
  }

  void add(std::uint64_t k) const noexcept { count_.fetch_add(k, std::memory_order_relaxed); }
  std::uint64_t get() const noexcept { return count_.load(std::memory_order_relaxed); }
  void reset() noexcept { count_.store(0, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> count_{0};
};

/// Uniforms driving one relaxed adjacency sample, `per_edge` per sampled entry.
struct EdgeNoise {
  int per_edge = 1;
  std::vector<double> uniforms;
};

struct PosteriorOptions {
  double tau = 0.5;
  SamplerKind method = SamplerKind::icdf;
  ReferenceDistribution ref = ReferenceDistribution::normal();
  /// Sample the upper triangle and mirror it; otherwise every off-diagonal entry is free.
  bool symmetric = true;
  /// Fixed diagonal of A before normalization (which adds I on its own).
  double self_loop = 0.0;
};

/// Product of independent edge Bernoullis, theta_ij = sigmoid(logit_ij).
class GraphPosterior {
 public:
  GraphPosterior() = default;
  GraphPosterior(std::size_t nodes, PosteriorOptions options);

  /// Logits at 0 plus uniform noise of magnitude `noise`, seeded.
  static GraphPosterior uninformative(std::size_t nodes, PosteriorOptions options,
                                      std::uint64_t seed, double noise = 0.01);

  std::size_t nodes() const noexcept { return nodes_; }
  const PosteriorOptions& options() const noexcept { return opt_; }
  double tau() const noexcept { return opt_.tau; }

  Matrix& logits() noexcept { return logits_; }
  const Matrix& logits() const noexcept { return logits_; }

  /// Entries that are sampled, in a fixed order: (i, j) with i < j when
  /// symmetric, all i != j otherwise.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }

  /// theta with the mirror and diagonal conventions applied; also E[A].
  Matrix probabilities() const;
  static Matrix probabilities(const Matrix& logits, const PosteriorOptions& options);

  /// Noise for the sample addressed by (seed, step, replica). Keyed by edge
  /// index, so the result is independent of evaluation order. Adds
  /// edges().size() * draws_per_sample(method) to the draw counter.
  EdgeNoise draw_noise(std::uint64_t seed, std::uint64_t step, std::uint64_t replica = 0) const;

  /// Median noise: every relaxed edge equals its hard threshold point
  /// (z = sigmoid(0) at theta = 0.5 for ICDF). Consumes no draws.
  EdgeNoise median_noise() const;

  /// Relaxed (unnormalized) adjacency for given logits and noise.
  Matrix relaxed_adjacency(const Matrix& logits, const EdgeNoise& noise) const;
  Var relaxed_adjacency(Var logits, const EdgeNoise& noise) const;

  /// normalize_adjacency(relaxed_adjacency(...)).
  Var sample_graph(Var logits, const EdgeNoise& noise) const;

  std::uint64_t draws() const noexcept { return counter_.get(); }
  void reset_draws() noexcept { counter_.reset(); }

 private:
  std::size_t nodes_ = 0;
  PosteriorOptions opt_;
  Matrix logits_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  DrawCounter counter_;
};

}  // namespace f3
