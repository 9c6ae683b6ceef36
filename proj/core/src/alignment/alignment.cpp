// SPDX-License-Identifier: Apache-2.0
#include "f3/alignment/alignment.hpp"

#include <cmath>

#include "f3/alignment/sinkhorn.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/matrix_io.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

// Diagonal log-kernel offset for hard mode: exp(4) ~ 55x preference for the
// identity matching keeps early Sinkhorn iterates close to a permutation.
constexpr double kHardDiagonal = 4.0;

Matrix noisy_identity(std::size_t rows, std::size_t cols, double noise, const CounterRng& rng,
                      std::uint64_t stream, double diag) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      m(i, j) = (i == j ? diag : 0.0) + noise * (2.0 * rng.uniform(stream, i * cols + j) - 1.0);
    }
  }
  return m;
}

}  // namespace

std::string_view to_string(AlignmentMode mode) {
  switch (mode) {
    case AlignmentMode::none: return "none";
    case AlignmentMode::soft: return "soft";
    case AlignmentMode::hard: return "hard";
    case AlignmentMode::tied: return "tied";
  }
  return "?";
}

AlignmentMode alignment_mode_from_string(std::string_view name) {
  if (name == "none") return AlignmentMode::none;
  if (name == "soft") return AlignmentMode::soft;
  if (name == "hard") return AlignmentMode::hard;
  if (name == "tied") return AlignmentMode::tied;
  throw ValidationError("unknown alignment mode '" + std::string(name) + "'");
}

AlignmentSet AlignmentSet::create(AlignmentMode mode, std::size_t clients, std::size_t latent_dim,
                                  std::size_t out_dim, std::uint64_t seed, double noise,
                                  std::size_t sinkhorn_iterations) {
  if (clients == 0 || latent_dim == 0) throw ContractError("AlignmentSet: empty configuration");
  if (mode == AlignmentMode::none && out_dim != latent_dim) {
    throw ValidationError("alignment mode none requires out_dim == latent_dim");
  }
  if (mode == AlignmentMode::hard && out_dim != latent_dim) {
    throw ValidationError("hard alignment requires square maps (out_dim == latent_dim)");
  }
  AlignmentSet a;
  a.mode_ = mode;
  a.clients_ = clients;
  a.d_ = latent_dim;
  a.d_out_ = out_dim;
  a.iterations_ = sinkhorn_iterations;
  const CounterRng rng(hash_keys(seed, 0xa119));
  switch (mode) {
    case AlignmentMode::none: break;
    case AlignmentMode::tied:
      a.params_.push_back(noisy_identity(out_dim, latent_dim, noise, rng, 0, 1.0));
      break;
    case AlignmentMode::soft:
      for (std::size_t i = 0; i < clients; ++i) {
        a.params_.push_back(noisy_identity(out_dim, latent_dim, noise, rng, i, 1.0));
      }
      break;
    case AlignmentMode::hard:
      for (std::size_t i = 0; i < clients; ++i) {
        a.params_.push_back(noisy_identity(out_dim, latent_dim, noise, rng, i, kHardDiagonal));
      }
      break;
  }
  return a;
}

std::vector<Var> AlignmentSet::effective(Tape& tape, std::span<const Var> params) const {
  if (params.size() != params_.size()) {
    throw ContractError("AlignmentSet::effective: expected " + std::to_string(params_.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  std::vector<Var> out;
  out.reserve(clients_);
  switch (mode_) {
    case AlignmentMode::none: {
      const Var eye = tape.constant(Matrix::identity(d_));
      out.assign(clients_, eye);
      break;
    }
    case AlignmentMode::tied: out.assign(clients_, params[0]); break;
    case AlignmentMode::soft: out.assign(params.begin(), params.end()); break;
    case AlignmentMode::hard:
      for (const Var& l : params) out.push_back(sinkhorn(exp(l), iterations_));
      break;
  }
  return out;
}

std::vector<Matrix> AlignmentSet::effective() const {
  Tape t;
  std::vector<Var> vars;
  for (const Matrix& m : params_) vars.push_back(t.constant(m));
  std::vector<Matrix> out;
  for (const Var& v : effective(t, vars)) out.push_back(v.value());
  return out;
}

void AlignmentSet::set_matrices(std::vector<Matrix> p) {
  if (mode_ != AlignmentMode::soft && mode_ != AlignmentMode::tied) {
    throw ContractError("set_matrices: only soft and tied maps are free matrices");
  }
  if (p.size() != params_.size()) throw ContractError("set_matrices: wrong matrix count");
  for (const Matrix& m : p) {
    if (m.rows() != d_out_ || m.cols() != d_) {
      throw ShapeError("set_matrices: expected " + shape_str(d_out_, d_) + ", got " + m.shape_str());
    }
  }
  params_ = std::move(p);
}

nlohmann::json AlignmentSet::to_json() const {
  nlohmann::json mats = nlohmann::json::array();
  for (const Matrix& m : params_) mats.push_back(matrix_to_json(m));
  return {{"mode", std::string(f3::to_string(mode_))},
          {"clients", clients_},
          {"latent_dim", d_},
          {"out_dim", d_out_},
          {"sinkhorn_iterations", iterations_},
          {"parameters", mats}};
}

AlignmentSet AlignmentSet::from_json(const nlohmann::json& j) {
  try {
    AlignmentSet a;
    a.mode_ = alignment_mode_from_string(j.at("mode").get<std::string>());
    a.clients_ = j.at("clients").get<std::size_t>();
    a.d_ = j.at("latent_dim").get<std::size_t>();
    a.d_out_ = j.at("out_dim").get<std::size_t>();
    a.iterations_ = j.at("sinkhorn_iterations").get<std::size_t>();
    for (const auto& m : j.at("parameters")) a.params_.push_back(matrix_from_json(m));
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("alignment record: ") + e.what());
  }
}

Matrix apply_alignment(const AlignmentSet& a, std::span<const Matrix> latents) {
  if (latents.size() != a.clients()) {
    throw ShapeError("apply_alignment: " + std::to_string(latents.size()) + " latents for " +
                     std::to_string(a.clients()) + " clients");
  }
  const auto P = a.effective();
  const std::size_t d_out = a.mode() == AlignmentMode::none ? a.latent_dim() : a.out_dim();
  Matrix out(latents.size(), d_out);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const Matrix& h = latents[i];
    if (h.rows() != a.latent_dim() || h.cols() != 1) {
      throw ShapeError("apply_alignment: client " + std::to_string(i) + " latent is " +
                       h.shape_str() + ", expected " + shape_str(a.latent_dim(), 1));
    }
    const Matrix ph = matmul(P[i], h);
    for (std::size_t c = 0; c < d_out; ++c) out(i, c) = ph[c];
  }
  return out;
}

Var apply_alignment(std::span<const Var> P, std::span<const Var> latents) {
  if (P.size() != latents.size() || P.empty()) {
    throw ShapeError("apply_alignment: " + std::to_string(latents.size()) + " latents for " +
                     std::to_string(P.size()) + " maps");
  }
  std::vector<Var> parts;
  parts.reserve(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (latents[i].cols() != P[i].cols()) {
      throw ShapeError("apply_alignment: client " + std::to_string(i) + " latent width " +
                       std::to_string(latents[i].cols()) + " does not match map " +
                       P[i].value().shape_str());
    }
    parts.push_back(matmul(latents[i], transpose(P[i])));
  }
  return vstack(parts);
}

}  // namespace f3
