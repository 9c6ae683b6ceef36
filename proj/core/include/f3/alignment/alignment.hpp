// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

enum class AlignmentMode { none, soft, hard, tied };

std::string_view to_string(AlignmentMode mode);
AlignmentMode alignment_mode_from_string(std::string_view name);

/// Per-client maps P_i (d_out x d) applied to latent rows before fusion.
///
/// soft: P_i are free matrices. tied: one shared free P. hard: P_i =
/// sinkhorn(exp(L_i), T) for free log-kernels L_i (square only). none: identity.
class AlignmentSet {
 public:
  AlignmentSet() = default;

  /// Soft and tied start at identity plus uniform noise of `noise` magnitude
  /// (identity padded or cropped when d_out != d); hard starts at log-kernels
  /// of the same noise around a strong diagonal.
  static AlignmentSet create(AlignmentMode mode, std::size_t clients, std::size_t latent_dim,
                             std::size_t out_dim, std::uint64_t seed, double noise = 0.01,
                             std::size_t sinkhorn_iterations = 5);

  AlignmentMode mode() const noexcept { return mode_; }
  std::size_t clients() const noexcept { return clients_; }
  std::size_t latent_dim() const noexcept { return d_; }
  std::size_t out_dim() const noexcept { return d_out_; }
  std::size_t sinkhorn_iterations() const noexcept { return iterations_; }

  /// Trainable matrices (empty for none).
  std::vector<Matrix>& parameters() noexcept { return params_; }
  const std::vector<Matrix>& parameters() const noexcept { return params_; }

  /// Effective P_i, one per client, from parameter Vars in parameters() order.
  std::vector<Var> effective(Tape& tape, std::span<const Var> params) const;
  /// Effective P_i without gradients.
  std::vector<Matrix> effective() const;

  /// Replace the maps outright (soft or tied, used by tests and oracles).
  void set_matrices(std::vector<Matrix> p);

  nlohmann::json to_json() const;
  static AlignmentSet from_json(const nlohmann::json& j);

 private:
  AlignmentMode mode_ = AlignmentMode::none;
  std::size_t clients_ = 0;
  std::size_t d_ = 0;
  std::size_t d_out_ = 0;
  std::size_t iterations_ = 5;
  std::vector<Matrix> params_;
};

/// Row i of the result is (P_i h_i)^T. `latents` holds one d x 1 column per client.
Matrix apply_alignment(const AlignmentSet& a, std::span<const Matrix> latents);

/// Batched form: client i contributes latents[i] (m x d) mapped to m x d_out;
/// results are stacked client-major into (n*m) x d_out.
Var apply_alignment(std::span<const Var> P, std::span<const Var> latents);

}  // namespace f3
