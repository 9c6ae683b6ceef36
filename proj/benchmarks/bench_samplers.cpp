// SPDX-License-Identifier: Apache-2.0
// ICDF vs Gumbel relaxed edge sampling, per edge and per full adjacency draw.

#include <cmath>

#include <benchmark/benchmark.h>

#include "f3/graphsampler/posterior.hpp"
#include "f3/graphsampler/relaxation.hpp"
#include "f3/numcore/rng.hpp"

namespace {

void BM_IcdfEdge(benchmark::State& state) {
  const auto ref = f3::ReferenceDistribution::normal();
  f3::DrawStream stream(1, 0);
  double theta = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f3::icdf_sample(theta, 0.5, ref, stream));
    theta = theta < 0.9 ? theta + 1e-3 : 0.1;
  }
  state.counters["draws/edge"] =
      static_cast<double>(stream.draws()) / static_cast<double>(state.iterations());
}
BENCHMARK(BM_IcdfEdge);

void BM_GumbelEdge(benchmark::State& state) {
  f3::DrawStream stream(1, 0);
  double theta = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f3::gumbel_sample(theta, 0.5, stream));
    theta = theta < 0.9 ? theta + 1e-3 : 0.1;
  }
  state.counters["draws/edge"] =
      static_cast<double>(stream.draws()) / static_cast<double>(state.iterations());
}
BENCHMARK(BM_GumbelEdge);

// One relaxed adjacency over n nodes (noise draw plus relaxation), as the
// global model does once per training step.
void BM_Adjacency(benchmark::State& state, f3::SamplerKind kind) {
  const auto n = static_cast<std::size_t>(state.range(0));
  f3::PosteriorOptions opt;
  opt.method = kind;
  const auto post = f3::GraphPosterior::uninformative(n, opt, 7, 0.5);
  std::uint64_t step = 0;
  for (auto _ : state) {
    const f3::EdgeNoise noise = post.draw_noise(3, step++);
    double acc = 0.0;
    const auto& logits = post.logits();
    std::size_t e = 0;
    for (const auto& [i, j] : post.edges()) {
      const double theta = 1.0 / (1.0 + std::exp(-logits(i, j)));
      if (kind == f3::SamplerKind::icdf) {
        acc += f3::icdf_relax(theta, opt.tau, opt.ref.inverse_cdf(noise.uniforms[e]), opt.ref);
      } else {
        acc += f3::gumbel_relax(theta, opt.tau, f3::gumbel_from_uniform(noise.uniforms[2 * e]),
                                f3::gumbel_from_uniform(noise.uniforms[2 * e + 1]));
      }
      ++e;
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(post.edges().size()));
}
BENCHMARK_CAPTURE(BM_Adjacency, icdf, f3::SamplerKind::icdf)->Arg(12)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Adjacency, gumbel, f3::SamplerKind::gumbel)->Arg(12)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
