// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/localmodels/embedding.hpp"
#include "f3/localmodels/shard.hpp"
#include "f3/numcore/adam.hpp"

namespace f3 {

struct LocalClient {
  std::size_t id = 0;
  Embedding embedding;
  Head head;
  ClientShard shard;

  std::size_t latent_dim() const noexcept { return f3::latent_dim(embedding); }
  std::size_t classes() const noexcept { return head.classes(); }

  /// Fresh client with seeded initialization (seed mixed with the client id).
  static LocalClient create(std::size_t id, EmbeddingKind kind, std::size_t input_dim,
                            std::size_t latent_dim, std::size_t classes, ClientShard shard,
                            std::uint64_t seed);
};

struct LocalOutput {
  Matrix h;      // d x 1
  Matrix probs;  // classes x 1
};

/// Throws MissingDataError when sample k is absent for this client.
LocalOutput local_forward(const LocalClient& client, std::size_t k);

/// Latents for every present sample, present_count x d, in shard order.
Matrix client_latents(const LocalClient& client);
/// Class probabilities for every present sample, present_count x classes.
Matrix client_probs(const LocalClient& client);

struct PretrainConfig {
  int epochs = 200;
  AdamConfig adam{};
};

struct PretrainHistory {
  std::vector<double> loss;  // per epoch, before the update
  std::size_t samples_used = 0;
  bool degenerate = false;   // fewer than two distinct labels
};

/// Full-batch Adam on cross-entropy over samples that are both present and
/// selected by `use` (one flag per global sample id; empty means all).
/// `labels` is indexed by global sample id.
PretrainHistory pretrain_local(LocalClient& client, std::span<const int> labels,
                               const PretrainConfig& cfg, std::span<const std::uint8_t> use = {});

inline constexpr int kCheckpointVersion = 1;

/// Parameters only; the shard stays with the data owner.
nlohmann::json client_checkpoint(const LocalClient& client);
/// Rebuilds embedding and head; the returned client has an empty shard.
LocalClient client_from_checkpoint(const nlohmann::json& j);

void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace f3
