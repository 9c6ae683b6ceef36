// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/alignment/alignment.hpp"
#include "f3/graphsampler/posterior.hpp"
#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

enum class GlobalVariant { mean_pool, gcn };
std::string_view to_string(GlobalVariant v);
GlobalVariant global_variant_from_string(std::string_view name);

/// Where the GCN gets its adjacency. none skips the graph multiply entirely,
/// which is the same as using the identity.
enum class GraphMode { none, given, knn, icdf, gumbel };
std::string_view to_string(GraphMode m);
GraphMode graph_mode_from_string(std::string_view name);
constexpr bool is_learned(GraphMode m) noexcept {
  return m == GraphMode::icdf || m == GraphMode::gumbel;
}

struct GlobalModelConfig {
  GlobalVariant variant = GlobalVariant::gcn;
  std::size_t hidden = 8;
  std::size_t classes = 2;
  /// gcn only: A' = A_hat relu(A_hat H W0) + H W_skip.
  bool skip = false;
  /// mean_pool only: biases b0, b1.
  bool use_bias = true;
  GraphMode graph = GraphMode::icdf;
  PosteriorOptions posterior{};
  /// Relaxed graph samples averaged per loss evaluation.
  std::size_t graph_samples = 1;
  /// Sample the graph at inference instead of using E[A].
  bool sample_at_inference = false;
};

/// Server-side fusion model: alignment, then either
///   mean_pool: softmax(mean_i relu(H_i W0 + b0) W1 + b1)
///   gcn:       softmax(mean_i [A_hat relu(A_hat H W0)]_i W1)
/// Latents arrive batched: one m x d matrix per client, zero rows where missing.
class GlobalModel {
 public:
  GlobalModel() = default;
  static GlobalModel create(const GlobalModelConfig& cfg, AlignmentSet alignment,
                            std::uint64_t seed);

  const GlobalModelConfig& config() const noexcept { return cfg_; }
  std::size_t clients() const noexcept { return alignment_.clients(); }
  std::size_t in_dim() const noexcept;

  Matrix W0, W1;   // in x hidden, hidden x classes
  Matrix b0, b1;   // 1 x hidden, 1 x classes (mean_pool with use_bias)
  Matrix W_skip;   // in x hidden (gcn with skip)

  AlignmentSet& alignment() noexcept { return alignment_; }
  const AlignmentSet& alignment() const noexcept { return alignment_; }
  GraphPosterior& posterior() noexcept { return posterior_; }
  const GraphPosterior& posterior() const noexcept { return posterior_; }

  /// Normalized adjacency used by given/knn modes.
  void set_fixed_graph(Matrix a_hat);
  const Matrix& fixed_graph() const noexcept { return fixed_; }

  /// Trainable matrices in a fixed order: W0, W1, [b0, b1], [W_skip],
  /// alignment parameters..., [edge logits].
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<Var> bind(Tape& tape, bool trainable = true) const;

  /// Training-time normalized graph for (seed, step, replica); an invalid Var
  /// when the mode has no graph. Learned modes draw fresh relaxed noise.
  Var training_graph(Tape& tape, std::span<const Var> params, std::uint64_t seed,
                     std::uint64_t step, std::uint64_t replica = 0) const;
  /// Inference graph: normalized E[A] for learned modes unless sampling is enabled.
  Var inference_graph(Tape& tape, std::span<const Var> params, std::uint64_t seed = 0) const;

  /// Relaxed graph for explicit noise (gradient checks, tests).
  Var graph_from_noise(std::span<const Var> params, const EdgeNoise& noise) const;

  /// Logits (m x classes) for batched latents and a graph from the two functions above.
  Var logits(std::span<const Var> params, std::span<const Var> latents, Var graph) const;

  nlohmann::json to_json() const;
  static GlobalModel from_json(const nlohmann::json& j);

 private:
  struct Layout {
    std::size_t W0 = 0, W1 = 1, b0 = 0, b1 = 0, skip = 0, align = 0, n_align = 0, logits = 0;
    bool bias = false, has_skip = false, has_logits = false;
  };
  Layout layout() const;

  GlobalModelConfig cfg_;
  AlignmentSet alignment_;
  GraphPosterior posterior_;
  Matrix fixed_;
};

/// Mean cross-entropy over the m samples in `latents` (one m x d matrix per
/// client), averaged over cfg.graph_samples graph draws for (seed, step).
/// ContractError when there are no samples.
Var f3_loss(const GlobalModel& gm, std::span<const Var> params, std::span<const Var> latents,
            std::span<const int> labels, std::uint64_t seed, std::uint64_t step);

/// Class probabilities at inference (m x classes), no gradients.
Matrix global_predict(const GlobalModel& gm, std::span<const Matrix> latents,
                      std::uint64_t seed = 0);

/// "row,col,theta" CSV of the learned edge probabilities.
std::string theta_csv(const GlobalModel& gm);

}  // namespace f3
