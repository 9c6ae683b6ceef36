// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/federation/config.hpp"
#include "f3/globalmodel/global_model.hpp"
#include "f3/localmodels/client.hpp"

namespace f3 {

struct MetricsReport {
  std::string variant;
  std::string graph_mode;
  std::string alignment;
  std::uint64_t seed = 0;
  double f1 = 0.0;
  double auc = 0.0;
  int epochs_run = 0;
  std::uint64_t transfers_out = 0;
  std::uint64_t transfers_in = 0;
  std::vector<std::uint64_t> out_per_client;
  std::vector<std::uint64_t> in_per_client;
  double lr = 0.0;
  double best_val_loss = 0.0;
  std::uint64_t rng_draws = 0;
  std::optional<std::size_t> chosen_client;
  double wall_clock_s = 0.0;

  /// Everything except wall_clock_s, which is the one field that is not
  /// reproducible by construction.
  nlohmann::json deterministic_json() const;
  nlohmann::json to_json() const;

  static std::string csv_header();
  std::string csv_row() const;
};

struct PipelineResult {
  std::vector<MetricsReport> reports;
  /// Pre-trained (and, when planted, permuted) clients; empty if only M ran.
  std::vector<LocalClient> clients;
  /// Trained global models by variant label.
  std::vector<std::pair<std::string, GlobalModel>> models;
  /// Local-prediction entropy per sample (empty if no client was pre-trained).
  std::vector<double> entropy;
  /// Bytes each client's pre-training read from its own shard.
  std::vector<std::uint64_t> pretrain_bytes_read;
};

/// Algorithm 1 for one seed: pre-train clients in isolation, collect the
/// one-round bundle, train and evaluate every configured variant.
PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace f3
