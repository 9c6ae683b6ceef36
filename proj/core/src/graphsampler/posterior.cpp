// SPDX-License-Identifier: Apache-2.0
#include "f3/graphsampler/posterior.hpp"

#include <cmath>

#include "f3/graphsampler/adjacency.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

// Relaxed edge value and its derivative w.r.t. the edge logit.
struct EdgeEval {
  double value;
  double dlogit;
};

EdgeEval eval_edge(double l, const double* u, const PosteriorOptions& o) {
  if (o.method == SamplerKind::icdf) {
    const double theta = sigmoid(l);
    const double q = o.ref.inverse_cdf_from_logit(l);
    const double s = o.ref.inverse_cdf(u[0]);
    const double z = sigmoid((q - s) / o.tau);
    // dq/dl = theta (1 - theta) / f(q)
    const double f = o.ref.pdf(q);
    const double dq = f > 0.0 ? theta * (1.0 - theta) / f : 0.0;
    return {z, z * (1.0 - z) / o.tau * dq};
  }
  const double g1 = gumbel_from_uniform(u[0]);
  const double g2 = gumbel_from_uniform(u[1]);
  const double y = sigmoid((l + g1 - g2) / o.tau);
  return {y, y * (1.0 - y) / o.tau};
}

}  // namespace

GraphPosterior::GraphPosterior(std::size_t nodes, PosteriorOptions options)
    : nodes_(nodes), opt_(options), logits_(nodes, nodes, 0.0) {
  if (nodes == 0) throw ContractError("GraphPosterior: need at least one node");
  if (!(opt_.tau > 0.0)) throw ContractError("GraphPosterior: tau must be > 0");
  if (!(opt_.self_loop >= 0.0 && opt_.self_loop <= 1.0)) {
    throw ContractError("GraphPosterior: self_loop must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = opt_.symmetric ? i + 1 : 0; j < nodes; ++j) {
      if (i != j) edges_.emplace_back(i, j);
    }
  }
}

GraphPosterior GraphPosterior::uninformative(std::size_t nodes, PosteriorOptions options,
                                             std::uint64_t seed, double noise) {
  GraphPosterior gp(nodes, options);
  const CounterRng rng(seed);
  for (std::size_t k = 0; k < gp.logits_.size(); ++k) {
    gp.logits_[k] = noise * (2.0 * rng.uniform(0x7e7a, k) - 1.0);
  }
  return gp;
}

Matrix GraphPosterior::probabilities(const Matrix& logits, const PosteriorOptions& o) {
  const std::size_t n = logits.rows();
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        p(i, j) = o.self_loop;
      } else if (o.symmetric) {
        p(i, j) = sigmoid(i < j ? logits(i, j) : logits(j, i));
      } else {
        p(i, j) = sigmoid(logits(i, j));
      }
    }
  }
  return p;
}

Matrix GraphPosterior::probabilities() const { return probabilities(logits_, opt_); }

EdgeNoise GraphPosterior::draw_noise(std::uint64_t seed, std::uint64_t step,
                                     std::uint64_t replica) const {
  EdgeNoise noise;
  noise.per_edge = draws_per_sample(opt_.method);
  noise.uniforms.resize(edges_.size() * static_cast<std::size_t>(noise.per_edge));
  const CounterRng rng(seed);
  const std::uint64_t stream = hash_keys(step, replica);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    for (int j = 0; j < noise.per_edge; ++j) {
      noise.uniforms[e * noise.per_edge + j] = rng.uniform(stream, 2 * e + j);
    }
  }
  counter_.add(noise.uniforms.size());
  return noise;
}

EdgeNoise GraphPosterior::median_noise() const {
  EdgeNoise noise;
  noise.per_edge = draws_per_sample(opt_.method);
  if (opt_.method == SamplerKind::icdf) {
    noise.uniforms.assign(edges_.size(), 0.5);
  } else {
    // g1 = g2 cancels the noise term.
    noise.uniforms.assign(edges_.size() * 2, 0.5);
  }
  return noise;
}

Matrix GraphPosterior::relaxed_adjacency(const Matrix& logits, const EdgeNoise& noise) const {
  if (logits.rows() != nodes_ || logits.cols() != nodes_) {
    throw ShapeError("relaxed_adjacency: logits " + logits.shape_str() + " for " +
                     std::to_string(nodes_) + " nodes");
  }
  if (noise.per_edge != draws_per_sample(opt_.method) ||
      noise.uniforms.size() != edges_.size() * static_cast<std::size_t>(noise.per_edge)) {
    throw ContractError("relaxed_adjacency: noise does not match the posterior");
  }
  Matrix a(nodes_, nodes_);
  for (std::size_t i = 0; i < nodes_; ++i) a(i, i) = opt_.self_loop;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [i, j] = edges_[e];
    const double z = eval_edge(logits(i, j), &noise.uniforms[e * noise.per_edge], opt_).value;
    a(i, j) = z;
    if (opt_.symmetric) a(j, i) = z;
  }
  return a;
}

Var GraphPosterior::relaxed_adjacency(Var logits, const EdgeNoise& noise) const {
  Matrix a = relaxed_adjacency(logits.value(), noise);
  // Copies keep the closure independent of this object's lifetime.
  return logits.tape()->record(
      std::move(a), {logits},
      [logits, noise, edges = edges_, o = opt_, n = nodes_](Tape& tp, const Matrix& g) {
        const Matrix& l = logits.value();
        Matrix d(n, n);
        for (std::size_t e = 0; e < edges.size(); ++e) {
          const auto [i, j] = edges[e];
          const double dz = eval_edge(l(i, j), &noise.uniforms[e * noise.per_edge], o).dlogit;
          const double upstream = o.symmetric ? g(i, j) + g(j, i) : g(i, j);
          d(i, j) = upstream * dz;
        }
        tp.accumulate(logits, d);
      });
}

Var GraphPosterior::sample_graph(Var logits, const EdgeNoise& noise) const {
  return normalize_adjacency(relaxed_adjacency(logits, noise));
}

}  // namespace f3
