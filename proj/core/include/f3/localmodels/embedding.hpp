// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

/// h = relu(U x + c).
struct FcEmbedding {
  Matrix U;  // d x input
  Matrix c;  // d x 1

  static FcEmbedding init(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return U.cols(); }
  std::size_t latent_dim() const noexcept { return U.rows(); }
};

/// Single-layer GRU read out at the last step, h_0 = 0:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   n = tanh(W_n x + U_n (r * h) + b_n)
///   h = (1 - z) * h + z * n
struct GruEmbedding {
  Matrix W_z, W_r, W_n;  // d x input
  Matrix U_z, U_r, U_n;  // d x d
  Matrix b_z, b_r, b_n;  // d x 1

  static GruEmbedding init(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return W_z.cols(); }
  std::size_t latent_dim() const noexcept { return W_z.rows(); }
};

using Embedding = std::variant<FcEmbedding, GruEmbedding>;

enum class EmbeddingKind { fc, gru };
std::string_view to_string(EmbeddingKind kind);
EmbeddingKind embedding_kind_from_string(std::string_view name);
EmbeddingKind kind_of(const Embedding& e) noexcept;

std::size_t latent_dim(const Embedding& e) noexcept;
std::size_t input_dim(const Embedding& e) noexcept;

/// Logistic output layer: probs = softmax(W h + b).
struct Head {
  Matrix W;  // classes x d
  Matrix b;  // classes x 1

  static Head init(std::size_t latent_dim, std::size_t classes, std::uint64_t seed);
  static Head zeros(std::size_t latent_dim, std::size_t classes);

  std::size_t classes() const noexcept { return W.rows(); }
};

/// Parameter matrices in a fixed order (FC: U, c; GRU: W_z, W_r, W_n, U_z,
/// U_r, U_n, b_z, b_r, b_n).
std::vector<Matrix*> parameters(Embedding& e);
std::vector<const Matrix*> parameters(const Embedding& e);

/// Batched embedding. Rows of `x` are samples; for a GRU each row holds the
/// sequence step-major (step t at columns [t*input, (t+1)*input)). `params`
/// follows parameters(e) and `e` supplies only the kind.
Var embed(const Embedding& e, std::span<const Var> params, const Matrix& x);

/// Same without gradients; returns samples x d.
Matrix embed(const Embedding& e, const Matrix& x);

/// Batched logits H W^T + b^T (samples x classes).
Var head_logits(Var h, Var W, Var b);
Matrix head_probs(const Head& head, const Matrix& h);

/// Throws ContractError unless `p` is a permutation of {0..n-1}.
void require_permutation(std::span<const std::size_t> p, std::size_t n);

/// Reorders latent coordinates so that h' = h[p] while head outputs are unchanged.
std::pair<FcEmbedding, Head> permute_fc(const FcEmbedding& e, const Head& head,
                                        std::span<const std::size_t> p);
std::pair<GruEmbedding, Head> permute_gru(const GruEmbedding& e, const Head& head,
                                          std::span<const std::size_t> p);
std::pair<Embedding, Head> permute(const Embedding& e, const Head& head,
                                   std::span<const std::size_t> p);

}  // namespace f3
