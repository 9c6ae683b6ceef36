// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "f3/federation/bundle.hpp"
#include "f3/numcore/matrix.hpp"

namespace f3 {

/// Modal local prediction per sample over present clients; ties go to the
/// lowest class. `predicted[i][k]` is -1 when client i lacks sample k.
/// DegenerateSampleError if a sample has no present client.
std::vector<int> majority_vote(const std::vector<std::vector<int>>& predicted, std::size_t classes);

/// Vote shares per sample (m x classes), a score matrix for AUC.
Matrix vote_shares(const std::vector<std::vector<int>>& predicted, std::size_t classes);

struct BestModelChoice {
  std::size_t client = 0;
  std::vector<double> val_f1;  // per client, on its present validation samples
  /// Clients by descending validation F1 (ties: lower id first); used to
  /// fill samples the chosen client did not observe.
  std::vector<std::size_t> ranking;
};

BestModelChoice best_model_selection(const LocalPredictions& lp, std::span<const int> labels,
                                     std::span<const std::size_t> val_ids);

/// System output of the chosen ranking: for each sample the prediction (and
/// probability row) of the best-ranked client that observed it.
std::pair<std::vector<int>, Matrix> best_model_outputs(const LocalPredictions& lp,
                                                       const BestModelChoice& choice,
                                                       std::span<const std::size_t> ids);

/// Shannon entropy (nats) of the empirical distribution of local predicted
/// classes over present clients, per sample.
std::vector<double> entropy_diagnostic(const std::vector<std::vector<int>>& predicted,
                                       std::size_t classes);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [lo, hi]; the last bin is closed on the right.
std::vector<HistogramBin> histogram(std::span<const double> values, double lo, double hi,
                                    std::size_t bins);
std::string histogram_csv(std::span<const HistogramBin> bins);

/// Fixed kappa-NN graph over clients. Every latent row goes through a seeded
/// random one-hidden-layer map (d -> width -> width, ReLU); a client's feature
/// is its concatenated projections over `ids`. Edges link each client to its
/// kappa most cosine-similar peers (ties: lower id), symmetrized by max, then
/// normalize_adjacency. ContractError unless kappa < clients.
Matrix knn_graph(const RepresentationBundle& bundle, std::size_t kappa,
                 std::span<const std::size_t> ids, std::uint64_t seed, std::size_t width = 16);

/// The 0/1 symmetric kappa-NN adjacency for explicit node features (rows).
Matrix knn_adjacency(const Matrix& features, std::size_t kappa);

}  // namespace f3
