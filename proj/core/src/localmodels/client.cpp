// SPDX-License-Identifier: Apache-2.0
#include "f3/localmodels/client.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/matrix_io.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

const char* const kFcNames[] = {"U", "c"};
const char* const kGruNames[] = {"W_z", "W_r", "W_n", "U_z", "U_r", "U_n", "b_z", "b_r", "b_n"};

}  // namespace

LocalClient LocalClient::create(std::size_t id, EmbeddingKind kind, std::size_t input_dim,
                                std::size_t latent_dim, std::size_t classes, ClientShard shard,
                                std::uint64_t seed) {
  const std::uint64_t s = hash_keys(seed, id);
  LocalClient c;
  c.id = id;
  if (kind == EmbeddingKind::fc) {
    c.embedding = FcEmbedding::init(input_dim, latent_dim, s);
  } else {
    c.embedding = GruEmbedding::init(input_dim, latent_dim, s);
  }
  c.head = Head::init(latent_dim, classes, s);
  c.shard = std::move(shard);
  return c;
}

LocalOutput local_forward(const LocalClient& client, std::size_t k) {
  const std::size_t pos = client.shard.position(k);
  if (k >= client.shard.total_samples() || pos == ClientShard::npos) {
    throw MissingDataError("client " + std::to_string(client.id) + " has no sample " +
                           std::to_string(k));
  }
  const Matrix& rows = client.shard.rows();
  const Matrix x(1, rows.cols(),
                 std::vector<double>(rows.row_span(pos).begin(), rows.row_span(pos).end()));
  const Matrix h = embed(client.embedding, x);
  const Matrix p = head_probs(client.head, h);
  return {transpose(h), transpose(p)};
}

Matrix client_latents(const LocalClient& client) {
  return embed(client.embedding, client.shard.rows());
}

Matrix client_probs(const LocalClient& client) {
  return head_probs(client.head, client_latents(client));
}

PretrainHistory pretrain_local(LocalClient& client, std::span<const int> labels,
                               const PretrainConfig& cfg, std::span<const std::uint8_t> use) {
  const ClientShard& shard = client.shard;
  if (labels.size() != shard.total_samples()) {
    throw ShapeError("pretrain_local: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(shard.total_samples()) + " samples");
  }
  if (!use.empty() && use.size() != shard.total_samples()) {
    throw ShapeError("pretrain_local: selection mask has the wrong length");
  }

  const Matrix& all = shard.rows();
  std::vector<std::size_t> picked;
  for (std::size_t r = 0; r < shard.present_count(); ++r) {
    if (use.empty() || use[shard.index()[r]]) picked.push_back(r);
  }
  PretrainHistory hist;
  hist.samples_used = picked.size();
  if (picked.empty() || cfg.epochs <= 0) return hist;

  Matrix x(picked.size(), all.cols());
  std::vector<int> y(picked.size());
  std::set<int> distinct;
  for (std::size_t r = 0; r < picked.size(); ++r) {
    const auto src = all.row_span(picked[r]);
    std::copy(src.begin(), src.end(), x.row_span(r).begin());
    y[r] = labels[shard.index()[picked[r]]];
    distinct.insert(y[r]);
  }
  hist.degenerate = distinct.size() < 2;

  std::vector<Matrix*> params = parameters(client.embedding);
  params.push_back(&client.head.W);
  params.push_back(&client.head.b);
  const std::size_t n_embed = params.size() - 2;

  Adam opt(cfg.adam);
  std::vector<Matrix> grads(params.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape t;
    std::vector<Var> vars;
    for (Matrix* p : params) vars.push_back(t.parameter(*p));
    const Var h = embed(client.embedding, std::span<const Var>(vars).first(n_embed), x);
    const Var loss = cross_entropy(softmax_rows(head_logits(h, vars[n_embed], vars[n_embed + 1])), y);
    hist.loss.push_back(loss.value()[0]);
    t.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) grads[i] = t.grad(vars[i]);
    opt.step(params, grads);
  }
  return hist;
}

nlohmann::json client_checkpoint(const LocalClient& client) {
  nlohmann::json params = nlohmann::json::object();
  const auto ptrs = parameters(client.embedding);
  const bool fc = kind_of(client.embedding) == EmbeddingKind::fc;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    params[fc ? kFcNames[i] : kGruNames[i]] = matrix_to_json(*ptrs[i]);
  }
  params["head_W"] = matrix_to_json(client.head.W);
  params["head_b"] = matrix_to_json(client.head.b);
  return {{"format", "f3-client"},
          {"format_version", kCheckpointVersion},
          {"id", client.id},
          {"embedding", std::string(to_string(kind_of(client.embedding)))},
          {"latent_dim", client.latent_dim()},
          {"input_dim", input_dim(client.embedding)},
          {"classes", client.classes()},
          {"parameters", params}};
}

LocalClient client_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "f3-client") throw FormatError("not a client checkpoint");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError("client checkpoint version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    LocalClient c;
    c.id = j.at("id").get<std::size_t>();
    const auto& params = j.at("parameters");
    if (embedding_kind_from_string(j.at("embedding").get<std::string>()) == EmbeddingKind::fc) {
      c.embedding = FcEmbedding{};
    } else {
      c.embedding = GruEmbedding{};
    }
    const bool fc = kind_of(c.embedding) == EmbeddingKind::fc;
    auto ptrs = parameters(c.embedding);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      *ptrs[i] = matrix_from_json(params.at(fc ? kFcNames[i] : kGruNames[i]));
    }
    c.head.W = matrix_from_json(params.at("head_W"));
    c.head.b = matrix_from_json(params.at("head_b"));
    if (c.head.W.cols() != c.latent_dim() || c.latent_dim() != j.at("latent_dim").get<std::size_t>()) {
      throw FormatError("client checkpoint: inconsistent latent dimension");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("client checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("client checkpoint: ") + e.what());
  }
}

void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

}  // namespace f3
