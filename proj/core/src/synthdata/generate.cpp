// SPDX-License-Identifier: Apache-2.0
#include "f3/synthdata/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "f3/numcore/errors.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

using Engine = boost::random::mt19937_64;

std::size_t uniform_index(Engine& g, std::size_t n) {
  return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(g);
}

double uniform01(Engine& g) { return boost::random::uniform_01<double>()(g); }

template <class T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(g, i)]);
}

std::vector<std::vector<std::size_t>> neighbor_lists(const Matrix& a) {
  std::vector<std::vector<std::size_t>> nb(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j && a(i, j) > 0.0) nb[i].push_back(j);
  return nb;
}

std::size_t component_count(std::size_t cls, std::size_t classes, std::size_t event_size) {
  if (classes <= 2) return 1;
  const double frac = static_cast<double>(cls - 1) / static_cast<double>(classes - 2);
  return 1 + static_cast<std::size_t>(std::lround(frac * static_cast<double>(event_size - 1)));
}

// Random node set of `size` nodes forming exactly `parts` mutually non-adjacent
// connected pieces. Rejection sampling; ValidationError if the graph cannot host it.
std::vector<std::size_t> event_set(std::size_t size, std::size_t parts,
                                   const std::vector<std::vector<std::size_t>>& nb, Engine& g) {
  const std::size_t n = nb.size();
  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::vector<bool> blocked(n, false);
    std::vector<std::size_t> chosen;
    bool ok = true;
    for (std::size_t p = 0; p < parts && ok; ++p) {
      const std::size_t want = size / parts + (p < size % parts ? 1 : 0);
      std::vector<std::size_t> free;
      for (std::size_t v = 0; v < n; ++v)
        if (!blocked[v]) free.push_back(v);
      if (free.empty()) {
        ok = false;
        break;
      }
      std::vector<bool> seen(n, false);
      std::deque<std::size_t> queue{free[uniform_index(g, free.size())]};
      seen[queue.front()] = true;
      std::vector<std::size_t> piece;
      while (!queue.empty() && piece.size() < want) {
        const std::size_t v = queue.front();
        queue.pop_front();
        piece.push_back(v);
        std::vector<std::size_t> next = nb[v];
        shuffle(next, g);
        for (std::size_t w : next) {
          if (!seen[w] && !blocked[w]) {
            seen[w] = true;
            queue.push_back(w);
          }
        }
      }
      if (piece.size() < want) {
        ok = false;
        break;
      }
      for (std::size_t v : piece) {
        chosen.push_back(v);
        blocked[v] = true;
        for (std::size_t w : nb[v]) blocked[w] = true;
      }
    }
    if (ok) {
      std::sort(chosen.begin(), chosen.end());
      return chosen;
    }
  }
  throw ValidationError("planted graph cannot host an event of " + std::to_string(size) +
                        " nodes in " + std::to_string(parts) + " separate pieces");
}

}  // namespace

std::string_view to_string(GraphKind k) {
  switch (k) {
    case GraphKind::ring: return "ring";
    case GraphKind::blocks: return "blocks";
    case GraphKind::erdos_renyi: return "erdos_renyi";
  }
  return "?";
}

GraphKind graph_kind_from_string(std::string_view name) {
  if (name == "ring") return GraphKind::ring;
  if (name == "blocks") return GraphKind::blocks;
  if (name == "erdos_renyi") return GraphKind::erdos_renyi;
  throw ValidationError("unknown graph kind '" + std::string(name) + "'");
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"clients", clients},       {"samples", samples},
          {"classes", classes},       {"graph", std::string(f3::to_string(graph))},
          {"block_size", block_size}, {"edge_prob", edge_prob},
          {"event_size", event_size}, {"conflict", conflict},
          {"missing", missing},       {"plant_permutations", plant_permutations},
          {"latent_dim", latent_dim}, {"gru_every", gru_every},
          {"fc_input_dim", fc_input_dim}, {"seq_len", seq_len},
          {"seq_channels", seq_channels}, {"noise", noise},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.clients = j.value("clients", s.clients);
    s.samples = j.value("samples", s.samples);
    s.classes = j.value("classes", s.classes);
    s.graph = graph_kind_from_string(j.value("graph", std::string(f3::to_string(s.graph))));
    s.block_size = j.value("block_size", s.block_size);
    s.edge_prob = j.value("edge_prob", s.edge_prob);
    s.event_size = j.value("event_size", s.event_size);
    s.conflict = j.value("conflict", s.conflict);
    s.missing = j.value("missing", s.missing);
    s.plant_permutations = j.value("plant_permutations", s.plant_permutations);
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    s.gru_every = j.value("gru_every", s.gru_every);
    s.fc_input_dim = j.value("fc_input_dim", s.fc_input_dim);
    s.seq_len = j.value("seq_len", s.seq_len);
    s.seq_channels = j.value("seq_channels", s.seq_channels);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dataset spec: ") + e.what());
  }
  return s;
}

void SyntheticSpec::validate() const {
  if (clients < 2) throw ValidationError("dataset spec: need at least 2 clients");
  if (classes < 2) throw ValidationError("dataset spec: need at least 2 classes");
  if (samples < 10 * classes) {
    throw ValidationError("dataset spec: too few samples (" + std::to_string(samples) +
                          " < 10 x " + std::to_string(classes) + " classes)");
  }
  if (!(conflict >= 0.0 && conflict <= 1.0)) throw ValidationError("dataset spec: conflict must lie in [0, 1]");
  if (!(missing >= 0.0 && missing < 1.0)) throw ValidationError("dataset spec: missing must lie in [0, 1)");
  if (event_size == 0 || event_size >= clients) {
    throw ValidationError("dataset spec: event_size must lie in [1, clients)");
  }
  if (classes > 2 && event_size < 2) {
    throw ValidationError("dataset spec: more than one event class needs event_size >= 2");
  }
  if (graph == GraphKind::blocks && (block_size < 2 || block_size > clients)) {
    throw ValidationError("dataset spec: block_size must lie in [2, clients]");
  }
  if (graph == GraphKind::erdos_renyi && !(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw ValidationError("dataset spec: edge_prob must lie in (0, 1]");
  }
  if (fc_input_dim == 0 || seq_len == 0 || seq_channels == 0 || latent_dim == 0) {
    throw ValidationError("dataset spec: dimensions must be positive");
  }
  if (!(noise >= 0.0)) throw ValidationError("dataset spec: noise must be >= 0");
}

Matrix planted_graph(const SyntheticSpec& spec) {
  const std::size_t n = spec.clients;
  Matrix a(n, n);
  auto link = [&a](std::size_t i, std::size_t j) {
    if (i == j) return;
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  };
  switch (spec.graph) {
    case GraphKind::ring:
      for (std::size_t i = 0; i < n; ++i) link(i, (i + 1) % n);
      break;
    case GraphKind::blocks:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (i / spec.block_size == j / spec.block_size) link(i, j);
      break;
    case GraphKind::erdos_renyi: {
      Engine g(hash_keys(spec.seed, 0x9a7));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (uniform01(g) < spec.edge_prob) link(i, j);
      break;
    }
  }
  return a;
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.clients, m = spec.samples, C = spec.classes;

  Dataset d;
  d.spec = spec;
  d.graph = planted_graph(spec);
  const auto nb = neighbor_lists(d.graph);

  for (std::size_t i = 0; i < n; ++i) {
    const bool gru = spec.gru_every > 0 && i % spec.gru_every == spec.gru_every - 1;
    d.kinds.push_back(gru ? EmbeddingKind::gru : EmbeddingKind::fc);
    d.input_dims.push_back(gru ? spec.seq_channels : spec.fc_input_dim + i % 3);
  }

  // Class templates, one set per client.
  Engine tg(hash_keys(spec.seed, 0x7e3));
  boost::random::normal_distribution<double> normal;
  std::vector<std::vector<std::vector<double>>> templ(n);
  for (std::size_t i = 0; i < n; ++i) {
    templ[i].resize(C);
    for (std::size_t c = 0; c < C; ++c) {
      if (d.kinds[i] == EmbeddingKind::fc) {
        templ[i][c].resize(d.input_dims[i]);
        for (double& v : templ[i][c]) v = normal(tg);
      } else {
        const double freq = 1.0 + static_cast<double>(c);
        templ[i][c].resize(spec.seq_len * spec.seq_channels);
        for (std::size_t ch = 0; ch < spec.seq_channels; ++ch) {
          const double phase = 2.0 * std::numbers::pi * uniform01(tg);
          for (std::size_t t = 0; t < spec.seq_len; ++t) {
            templ[i][c][t * spec.seq_channels + ch] =
                std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) /
                             static_cast<double>(spec.seq_len) + phase);
          }
        }
      }
    }
  }

  // Balanced labels in random order.
  Engine g(hash_keys(spec.seed, 0x1abe1));
  d.labels.resize(m);
  for (std::size_t k = 0; k < m; ++k) d.labels[k] = static_cast<int>(k % C);
  shuffle(d.labels, g);

  d.shown.assign(n, std::vector<int>(m, 0));
  d.conflicted.assign(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    const int y = d.labels[k];
    if (y == 0) continue;
    if (uniform01(g) >= spec.conflict) {
      for (std::size_t i = 0; i < n; ++i) d.shown[i][k] = y;
      continue;
    }
    d.conflicted[k] = 1;
    const auto nodes = event_set(spec.event_size,
                                 component_count(static_cast<std::size_t>(y), C, spec.event_size),
                                 nb, g);
    for (std::size_t v : nodes) d.shown[v][k] = 1 + static_cast<int>(uniform_index(g, C - 1));
  }

  // Missing pairs; every sample keeps at least one client.
  Engine mg(hash_keys(spec.seed, 0x3155));
  std::vector<std::vector<std::uint8_t>> present(n, std::vector<std::uint8_t>(m, 1));
  for (std::size_t k = 0; k < m; ++k) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      present[i][k] = uniform01(mg) >= spec.missing;
      any = any || present[i][k];
    }
    if (!any) present[uniform_index(mg, n)][k] = 1;
  }

  Engine ng(hash_keys(spec.seed, 0x4015e));
  for (std::size_t i = 0; i < n; ++i) {
    const double sd = d.kinds[i] == EmbeddingKind::fc ? spec.noise : 0.5 * spec.noise;
    const std::size_t width = templ[i][0].size();
    std::vector<std::size_t> index;
    std::vector<double> rows;
    for (std::size_t k = 0; k < m; ++k) {
      if (!present[i][k]) {
        d.shown[i][k] = -1;
        continue;
      }
      index.push_back(k);
      for (std::size_t f = 0; f < width; ++f) rows.push_back(templ[i][d.shown[i][k]][f] + sd * normal(ng));
    }
    const std::size_t count = index.size();
    d.shards.emplace_back(m, std::move(index), Matrix(count, width, std::move(rows)));
  }

  if (spec.plant_permutations) {
    Engine pg(hash_keys(spec.seed, 0x9e7));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> p(spec.latent_dim);
      std::iota(p.begin(), p.end(), std::size_t{0});
      shuffle(p, pg);
      d.permutations.push_back(std::move(p));
    }
  }
  return d;
}

bool Dataset::operator==(const Dataset& o) const {
  return spec.to_json() == o.spec.to_json() && labels == o.labels && kinds == o.kinds &&
         input_dims == o.input_dims && shards == o.shards && graph == o.graph &&
         permutations == o.permutations && shown == o.shown && conflicted == o.conflicted;
}

}  // namespace f3
