// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/alignment/alignment.hpp"
#include "f3/federation/trainer.hpp"
#include "f3/globalmodel/global_model.hpp"
#include "f3/graphsampler/reference.hpp"
#include "f3/synthdata/dataset.hpp"

namespace f3 {

enum class VariantId {
  B_majority,
  D_best_model,
  E_mean_pool,
  G_concat,
  H_no_align,
  J_tied,
  K_align,
  L_vfl_graph_align,
  M_vfl_scratch,
};

std::string_view to_string(VariantId v);
/// Accepts the full name ("K_align") or its letter ("K").
VariantId variant_from_string(std::string_view name);

constexpr bool is_vfl(VariantId v) noexcept {
  return v == VariantId::L_vfl_graph_align || v == VariantId::M_vfl_scratch;
}
constexpr bool uses_gcn(VariantId v) noexcept {
  return v == VariantId::H_no_align || v == VariantId::J_tied || v == VariantId::K_align || is_vfl(v);
}

struct VariantConfig {
  VariantId id = VariantId::K_align;
  /// Meaningful for GCN variants only; other variants report "none".
  GraphMode graph = GraphMode::icdf;
  std::size_t kappa = 10;

  /// "K_align" or "K_align/none" when the graph differs from icdf.
  std::string label() const;
};

struct SamplerConfig {
  double tau = 0.5;
  ReferenceKind reference = ReferenceKind::standard_normal;
  double sigma = 1.0;
  bool symmetric = true;
  double self_loop = 0.0;
  std::size_t samples_per_step = 1;
  bool sample_at_inference = false;
  /// Adam rate for the edge logits; unset: the global model's rate. Edge
  /// logits see a much weaker gradient than the weights they feed.
  std::optional<double> logit_lr;
};

/// Declarative description of a run. Serializes to JSON; from_json rejects
/// unknown keys so typos surface before any training.
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::string dataset_path;  // empty: generate from `dataset`
  SyntheticSpec dataset;
  std::vector<VariantConfig> variants;

  AlignmentMode alignment = AlignmentMode::soft;  // K, L, M
  std::size_t aligned_dim = 0;                    // 0: same as latent_dim
  std::size_t sinkhorn_iterations = 5;
  SamplerConfig sampler;

  std::size_t latent_dim = 16;
  std::size_t hidden = 8;
  bool skip = true;
  /// Biases b0, b1 of the mean-pool variant (E). Without them and without
  /// skip, E is the same model as H with graph none.
  bool pool_bias = true;

  int pretrain_epochs = 200;
  double pretrain_lr = 0.01;
  EarlyStopping global;
  std::optional<double> vfl_local_lr;  // unset: same rate as the global model

  std::vector<std::uint64_t> seeds{0};
  std::size_t threads = 1;
  std::string out_dir = "runs/f3";

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// ValidationError on inconsistencies.
  void validate() const;

  /// All nine variants with the default graph.
  static std::vector<VariantConfig> all_variants();
};

}  // namespace f3
