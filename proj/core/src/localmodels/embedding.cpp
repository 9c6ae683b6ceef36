// SPDX-License-Identifier: Apache-2.0
#include "f3/localmodels/embedding.hpp"

#include <cmath>
#include <string>

#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

Matrix uniform_init(std::size_t rows, std::size_t cols, double bound, std::uint64_t seed,
                    std::uint64_t stream) {
  const CounterRng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = bound * (2.0 * rng.uniform(stream, k) - 1.0);
  return m;
}

Matrix permute_rows(const Matrix& m, std::span<const std::size_t> p) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(p[i], j);
  return out;
}

Matrix permute_cols(const Matrix& m, std::span<const std::size_t> p) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, p[j]);
  return out;
}

Matrix permute_both(const Matrix& m, std::span<const std::size_t> p) {
  return permute_cols(permute_rows(m, p), p);
}

Var fc_forward(std::span<const Var> params, Var x) {
  if (params.size() != 2) throw ContractError("fc embedding expects 2 parameters");
  return relu(add_row_broadcast(matmul(x, transpose(params[0])), transpose(params[1])));
}

Var gru_forward(std::span<const Var> params, const Matrix& x, std::size_t input) {
  if (params.size() != 9) throw ContractError("gru embedding expects 9 parameters");
  if (input == 0 || x.cols() % input != 0) {
    throw ShapeError("gru embedding: row width " + std::to_string(x.cols()) +
                     " is not a multiple of the step width " + std::to_string(input));
  }
  Tape& t = *params[0].tape();
  const std::size_t steps = x.cols() / input;
  const std::size_t d = params[0].rows();

  const Var wz = transpose(params[0]), wr = transpose(params[1]), wn = transpose(params[2]);
  const Var uz = transpose(params[3]), ur = transpose(params[4]), un = transpose(params[5]);
  const Var bz = transpose(params[6]), br = transpose(params[7]), bn = transpose(params[8]);

  Var h = t.constant(Matrix(x.rows(), d));
  for (std::size_t s = 0; s < steps; ++s) {
    Matrix xs(x.rows(), input);
    for (std::size_t k = 0; k < x.rows(); ++k)
      for (std::size_t j = 0; j < input; ++j) xs(k, j) = x(k, s * input + j);
    const Var xt = t.constant(std::move(xs));

    const Var z = sigmoid(add_row_broadcast(add(matmul(xt, wz), matmul(h, uz)), bz));
    const Var r = sigmoid(add_row_broadcast(add(matmul(xt, wr), matmul(h, ur)), br));
    const Var n = tanh(add_row_broadcast(add(matmul(xt, wn), matmul(hadamard(r, h), un)), bn));
    h = add(hadamard(add_scalar(scale(z, -1.0), 1.0), h), hadamard(z, n));
  }
  return h;
}

}  // namespace

FcEmbedding FcEmbedding::init(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed) {
  if (input_dim == 0 || latent_dim == 0) throw ContractError("FcEmbedding: zero dimension");
  const double a = 1.0 / std::sqrt(static_cast<double>(input_dim));
  return {uniform_init(latent_dim, input_dim, a, seed, 1), uniform_init(latent_dim, 1, a, seed, 2)};
}

GruEmbedding GruEmbedding::init(std::size_t input_dim, std::size_t latent_dim,
                                std::uint64_t seed) {
  if (input_dim == 0 || latent_dim == 0) throw ContractError("GruEmbedding: zero dimension");
  const double ax = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double ah = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  GruEmbedding g;
  g.W_z = uniform_init(latent_dim, input_dim, ax, seed, 11);
  g.W_r = uniform_init(latent_dim, input_dim, ax, seed, 12);
  g.W_n = uniform_init(latent_dim, input_dim, ax, seed, 13);
  g.U_z = uniform_init(latent_dim, latent_dim, ah, seed, 14);
  g.U_r = uniform_init(latent_dim, latent_dim, ah, seed, 15);
  g.U_n = uniform_init(latent_dim, latent_dim, ah, seed, 16);
  g.b_z = uniform_init(latent_dim, 1, ah, seed, 17);
  g.b_r = uniform_init(latent_dim, 1, ah, seed, 18);
  g.b_n = uniform_init(latent_dim, 1, ah, seed, 19);
  return g;
}

std::string_view to_string(EmbeddingKind kind) { return kind == EmbeddingKind::fc ? "fc" : "gru"; }

EmbeddingKind embedding_kind_from_string(std::string_view name) {
  if (name == "fc") return EmbeddingKind::fc;
  if (name == "gru") return EmbeddingKind::gru;
  throw ValidationError("unknown embedding kind '" + std::string(name) + "'");
}

EmbeddingKind kind_of(const Embedding& e) noexcept {
  return std::holds_alternative<FcEmbedding>(e) ? EmbeddingKind::fc : EmbeddingKind::gru;
}

std::size_t latent_dim(const Embedding& e) noexcept {
  return std::visit([](const auto& v) { return v.latent_dim(); }, e);
}

std::size_t input_dim(const Embedding& e) noexcept {
  return std::visit([](const auto& v) { return v.input_dim(); }, e);
}

Head Head::init(std::size_t latent_dim, std::size_t classes, std::uint64_t seed) {
  const double a = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  return {uniform_init(classes, latent_dim, a, seed, 31), uniform_init(classes, 1, a, seed, 32)};
}

Head Head::zeros(std::size_t latent_dim, std::size_t classes) {
  return {Matrix(classes, latent_dim), Matrix(classes, 1)};
}

std::vector<Matrix*> parameters(Embedding& e) {
  if (auto* fc = std::get_if<FcEmbedding>(&e)) return {&fc->U, &fc->c};
  auto& g = std::get<GruEmbedding>(e);
  return {&g.W_z, &g.W_r, &g.W_n, &g.U_z, &g.U_r, &g.U_n, &g.b_z, &g.b_r, &g.b_n};
}

std::vector<const Matrix*> parameters(const Embedding& e) {
  auto ptrs = parameters(const_cast<Embedding&>(e));
  return {ptrs.begin(), ptrs.end()};
}

Var embed(const Embedding& e, std::span<const Var> params, const Matrix& x) {
  if (params.empty()) throw ContractError("embed: no parameters");
  if (kind_of(e) == EmbeddingKind::fc) {
    if (x.cols() != params[0].cols()) {
      throw ShapeError("fc embedding: input " + x.shape_str() + " for U " +
                       params[0].value().shape_str());
    }
    return fc_forward(params, params[0].tape()->constant(x));
  }
  return gru_forward(params, x, params[0].cols());
}

Matrix embed(const Embedding& e, const Matrix& x) {
  Tape t;
  std::vector<Var> vars;
  for (const Matrix* m : parameters(e)) vars.push_back(t.constant(*m));
  return embed(e, vars, x).value();
}

Var head_logits(Var h, Var W, Var b) {
  return add_row_broadcast(matmul(h, transpose(W)), transpose(b));
}

Matrix head_probs(const Head& head, const Matrix& h) {
  Tape t;
  return softmax_rows(head_logits(t.constant(h), t.constant(head.W), t.constant(head.b))).value();
}

void require_permutation(std::span<const std::size_t> p, std::size_t n) {
  if (p.size() != n) {
    throw ContractError("permutation has length " + std::to_string(p.size()) + ", expected " +
                        std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (std::size_t v : p) {
    if (v >= n || seen[v]) throw ContractError("not a permutation of 0.." + std::to_string(n - 1));
    seen[v] = true;
  }
}

std::pair<FcEmbedding, Head> permute_fc(const FcEmbedding& e, const Head& head,
                                        std::span<const std::size_t> p) {
  require_permutation(p, e.latent_dim());
  if (head.W.cols() != e.latent_dim()) throw ShapeError("permute_fc: head does not match latent dim");
  return {FcEmbedding{permute_rows(e.U, p), permute_rows(e.c, p)},
          Head{permute_cols(head.W, p), head.b}};
}

std::pair<GruEmbedding, Head> permute_gru(const GruEmbedding& e, const Head& head,
                                          std::span<const std::size_t> p) {
  require_permutation(p, e.latent_dim());
  if (head.W.cols() != e.latent_dim()) throw ShapeError("permute_gru: head does not match latent dim");
  GruEmbedding g;
  g.W_z = permute_rows(e.W_z, p);
  g.W_r = permute_rows(e.W_r, p);
  g.W_n = permute_rows(e.W_n, p);
  g.U_z = permute_both(e.U_z, p);
  g.U_r = permute_both(e.U_r, p);
  g.U_n = permute_both(e.U_n, p);
  g.b_z = permute_rows(e.b_z, p);
  g.b_r = permute_rows(e.b_r, p);
  g.b_n = permute_rows(e.b_n, p);
  return {std::move(g), Head{permute_cols(head.W, p), head.b}};
}

std::pair<Embedding, Head> permute(const Embedding& e, const Head& head,
                                   std::span<const std::size_t> p) {
  if (const auto* fc = std::get_if<FcEmbedding>(&e)) {
    auto [pe, ph] = permute_fc(*fc, head, p);
    return {Embedding{std::move(pe)}, std::move(ph)};
  }
  auto [pe, ph] = permute_gru(std::get<GruEmbedding>(e), head, p);
  return {Embedding{std::move(pe)}, std::move(ph)};
}

}  // namespace f3
