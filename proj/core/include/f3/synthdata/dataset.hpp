// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "f3/localmodels/embedding.hpp"
#include "f3/localmodels/shard.hpp"
#include "f3/numcore/matrix.hpp"

namespace f3 {

enum class GraphKind { ring, blocks, erdos_renyi };
std::string_view to_string(GraphKind k);
GraphKind graph_kind_from_string(std::string_view name);

/// Knobs of the planted-event generator.
///
/// Class 0 is "normal". A sample of event class c >= 1 activates `event_size`
/// nodes whose layout on the planted graph encodes c: class 1 is one connected
/// region, the last class is an independent set, classes in between split the
/// same node count into more and more components. Every class has the same
/// number of active nodes, so only the layout separates event classes.
///
/// With probability 1 - conflict an event sample is clean and every client
/// shows the template of the true class. Otherwise active nodes show the
/// template of a random event class and the rest show the normal template,
/// which leaves the graph as the only way to recover the label.
struct SyntheticSpec {
  std::size_t clients = 12;
  std::size_t samples = 600;
  std::size_t classes = 3;
  GraphKind graph = GraphKind::ring;
  std::size_t block_size = 4;   // blocks
  double edge_prob = 0.3;       // erdos_renyi
  std::size_t event_size = 4;
  double conflict = 0.6;
  double missing = 0.1;
  bool plant_permutations = true;
  std::size_t latent_dim = 16;  // length of each planted permutation
  /// Every gru_every-th client (i % gru_every == gru_every - 1) is a GRU client; 0 disables.
  std::size_t gru_every = 4;
  std::size_t fc_input_dim = 8;  // client i gets fc_input_dim + i % 3 features
  std::size_t seq_len = 12;
  std::size_t seq_channels = 2;
  double noise = 0.5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
  /// ValidationError on inconsistent settings (including samples < 10 * classes).
  void validate() const;
};

struct Dataset {
  SyntheticSpec spec;
  std::vector<int> labels;
  std::vector<EmbeddingKind> kinds;
  /// Per client: features per row for FC, channels per step for GRU.
  std::vector<std::size_t> input_dims;
  std::vector<ClientShard> shards;
  Matrix graph;  // 0/1 planted adjacency, zero diagonal
  /// Planted latent permutations, one per client (empty when off).
  std::vector<std::vector<std::size_t>> permutations;
  /// Template class each client showed for each sample (clients x samples), -1 if missing.
  std::vector<std::vector<int>> shown;
  /// Per sample: 1 when the conflicted branch was taken.
  std::vector<std::uint8_t> conflicted;

  std::size_t clients() const noexcept { return shards.size(); }
  std::size_t samples() const noexcept { return labels.size(); }
  bool operator==(const Dataset& other) const;
};

Matrix planted_graph(const SyntheticSpec& spec);

Dataset generate(const SyntheticSpec& spec);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Binary file: "F3DS", u32 version, u64 header length, JSON header, then
/// little-endian sections (labels i32, graph f64, per client presence u8 and
/// feature rows f64, permutations i32, shown i32, conflicted u8).
void export_dataset(const Dataset& d, const std::filesystem::path& path);
/// FormatError with the byte offset on truncation or a bad magic/version.
Dataset import_dataset(const std::filesystem::path& path);

/// Debug dump: one CSV per client plus labels.csv and graph.csv in `dir`.
void export_dataset_csv(const Dataset& d, const std::filesystem::path& dir);

}  // namespace f3
