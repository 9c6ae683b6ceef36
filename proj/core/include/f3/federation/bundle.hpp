// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "f3/localmodels/client.hpp"
#include "f3/numcore/matrix.hpp"

namespace f3 {

enum class Split : std::uint8_t { train, val, test };
std::string_view to_string(Split s);

/// Stratified 70/10/20 assignment (fractions configurable), seeded.
std::vector<Split> stratified_split(std::span<const int> labels, std::size_t classes,
                                    std::uint64_t seed, double train = 0.7, double val = 0.1);

/// Sample ids assigned to `s`, ascending.
std::vector<std::size_t> split_indices(std::span<const Split> split, Split s);

/// In-process stand-in for the network: counts messages per client.
class TransferLog {
 public:
  explicit TransferLog(std::size_t clients = 0) : out_(clients, 0), in_(clients, 0) {}

  void outbound(std::size_t client) { out_.at(client) += 1; }
  void inbound(std::size_t client) { in_.at(client) += 1; }

  const std::vector<std::uint64_t>& out() const noexcept { return out_; }
  const std::vector<std::uint64_t>& in() const noexcept { return in_; }
  std::uint64_t total_out() const noexcept;
  std::uint64_t total_in() const noexcept;

 private:
  std::vector<std::uint64_t> out_;
  std::vector<std::uint64_t> in_;
};

/// What the server holds after the single upload round.
struct RepresentationBundle {
  std::vector<Matrix> latents;                   // per client, m x d, zero rows where absent
  std::vector<std::vector<std::uint8_t>> present;  // per client, length m
  std::vector<int> labels;
  std::vector<Split> split;

  std::size_t clients() const noexcept { return latents.size(); }
  std::size_t samples() const noexcept { return labels.size(); }
  std::size_t latent_dim() const noexcept { return latents.empty() ? 0 : latents[0].cols(); }

  /// Per-client latents restricted to the given sample ids.
  std::vector<Matrix> rows(std::span<const std::size_t> ids) const;
  /// Throws DegenerateSampleError naming the first sample no client observed.
  void require_coverage() const;
};

/// Each client computes its latents once and uploads them: one outbound
/// transfer per client.
RepresentationBundle collect_bundle(std::span<const LocalClient> clients,
                                    std::span<const int> labels, std::span<const Split> split,
                                    TransferLog& log);

/// Local predictions, one upload per client: per client a length-m vector of
/// predicted classes (-1 where absent) and an m x C probability matrix (zero rows where absent).
struct LocalPredictions {
  std::vector<std::vector<int>> predicted;
  std::vector<Matrix> probs;
  std::size_t classes = 0;
};

LocalPredictions collect_predictions(std::span<const LocalClient> clients, TransferLog& log);

/// Rows of `m` at `ids`, in order.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> ids);

}  // namespace f3
