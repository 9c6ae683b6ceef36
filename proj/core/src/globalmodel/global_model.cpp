// SPDX-License-Identifier: Apache-2.0
#include "f3/globalmodel/global_model.hpp"

#include <cmath>
#include <cstdio>

#include "f3/graphsampler/adjacency.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/matrix_io.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

Matrix uniform_init(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t stream) {
  const double a = 1.0 / std::sqrt(static_cast<double>(rows));
  const CounterRng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = a * (2.0 * rng.uniform(stream, k) - 1.0);
  return m;
}

nlohmann::json posterior_options_json(const PosteriorOptions& o) {
  return {{"tau", o.tau},
          {"method", std::string(to_string(o.method))},
          {"reference", std::string(to_string(o.ref.kind()))},
          {"sigma", o.ref.sigma()},
          {"symmetric", o.symmetric},
          {"self_loop", o.self_loop}};
}

PosteriorOptions posterior_options_from_json(const nlohmann::json& j) {
  PosteriorOptions o;
  o.tau = j.at("tau").get<double>();
  o.method = sampler_kind_from_string(j.at("method").get<std::string>());
  o.ref = ReferenceDistribution(reference_kind_from_string(j.at("reference").get<std::string>()),
                                j.at("sigma").get<double>());
  o.symmetric = j.at("symmetric").get<bool>();
  o.self_loop = j.at("self_loop").get<double>();
  return o;
}

}  // namespace

std::string_view to_string(GlobalVariant v) { return v == GlobalVariant::gcn ? "gcn" : "mean_pool"; }

GlobalVariant global_variant_from_string(std::string_view name) {
  if (name == "gcn") return GlobalVariant::gcn;
  if (name == "mean_pool") return GlobalVariant::mean_pool;
  throw ValidationError("unknown global model variant '" + std::string(name) + "'");
}

std::string_view to_string(GraphMode m) {
  switch (m) {
    case GraphMode::none: return "none";
    case GraphMode::given: return "given";
    case GraphMode::knn: return "knn";
    case GraphMode::icdf: return "icdf";
    case GraphMode::gumbel: return "gumbel";
  }
  return "?";
}

GraphMode graph_mode_from_string(std::string_view name) {
  if (name == "none") return GraphMode::none;
  if (name == "given") return GraphMode::given;
  if (name == "knn") return GraphMode::knn;
  if (name == "icdf") return GraphMode::icdf;
  if (name == "gumbel") return GraphMode::gumbel;
  throw ValidationError("unknown graph mode '" + std::string(name) + "'");
}

GlobalModel GlobalModel::create(const GlobalModelConfig& cfg, AlignmentSet alignment,
                                std::uint64_t seed) {
  if (cfg.hidden == 0 || cfg.classes < 2) throw ValidationError("global model: need hidden > 0 and >= 2 classes");
  if (cfg.graph_samples == 0) throw ValidationError("global model: graph_samples must be >= 1");
  if (cfg.variant == GlobalVariant::mean_pool && cfg.graph != GraphMode::none) {
    throw ValidationError("mean_pool global model takes no graph (graph mode must be none)");
  }
  GlobalModel gm;
  gm.cfg_ = cfg;
  gm.alignment_ = std::move(alignment);
  const std::size_t in = gm.in_dim();
  const std::uint64_t s = hash_keys(seed, 0x610ba1);
  gm.W0 = uniform_init(in, cfg.hidden, s, 1);
  gm.W1 = uniform_init(cfg.hidden, cfg.classes, s, 2);
  if (cfg.variant == GlobalVariant::mean_pool && cfg.use_bias) {
    gm.b0 = Matrix(1, cfg.hidden);
    gm.b1 = Matrix(1, cfg.classes);
  }
  if (cfg.variant == GlobalVariant::gcn && cfg.skip) gm.W_skip = uniform_init(in, cfg.hidden, s, 3);
  if (is_learned(cfg.graph)) {
    PosteriorOptions o = cfg.posterior;
    o.method = cfg.graph == GraphMode::icdf ? SamplerKind::icdf : SamplerKind::gumbel;
    gm.cfg_.posterior = o;
    gm.posterior_ = GraphPosterior::uninformative(gm.clients(), o, hash_keys(s, 4));
  }
  return gm;
}

std::size_t GlobalModel::in_dim() const noexcept {
  return alignment_.mode() == AlignmentMode::none ? alignment_.latent_dim() : alignment_.out_dim();
}

void GlobalModel::set_fixed_graph(Matrix a_hat) {
  if (a_hat.rows() != clients() || a_hat.cols() != clients()) {
    throw ShapeError("set_fixed_graph: expected " + shape_str(clients(), clients()) + ", got " +
                     a_hat.shape_str());
  }
  fixed_ = std::move(a_hat);
}

GlobalModel::Layout GlobalModel::layout() const {
  Layout l;
  std::size_t k = 2;
  l.bias = cfg_.variant == GlobalVariant::mean_pool && cfg_.use_bias;
  if (l.bias) {
    l.b0 = k++;
    l.b1 = k++;
  }
  l.has_skip = cfg_.variant == GlobalVariant::gcn && cfg_.skip;
  if (l.has_skip) l.skip = k++;
  l.align = k;
  l.n_align = alignment_.parameters().size();
  k += l.n_align;
  l.has_logits = is_learned(cfg_.graph);
  if (l.has_logits) l.logits = k++;
  return l;
}

std::vector<Matrix*> GlobalModel::parameters() {
  const Layout l = layout();
  std::vector<Matrix*> out{&W0, &W1};
  if (l.bias) {
    out.push_back(&b0);
    out.push_back(&b1);
  }
  if (l.has_skip) out.push_back(&W_skip);
  for (Matrix& m : alignment_.parameters()) out.push_back(&m);
  if (l.has_logits) out.push_back(&posterior_.logits());
  return out;
}

std::vector<const Matrix*> GlobalModel::parameters() const {
  const auto ptrs = const_cast<GlobalModel*>(this)->parameters();
  return {ptrs.begin(), ptrs.end()};
}

std::vector<Var> GlobalModel::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  for (const Matrix* m : parameters()) vars.push_back(trainable ? tape.parameter(*m) : tape.constant(*m));
  return vars;
}

Var GlobalModel::training_graph(Tape& tape, std::span<const Var> params, std::uint64_t seed,
                                std::uint64_t step, std::uint64_t replica) const {
  switch (cfg_.graph) {
    case GraphMode::none: return {};
    case GraphMode::given:
    case GraphMode::knn:
      if (fixed_.empty()) throw ContractError("graph mode " + std::string(to_string(cfg_.graph)) + " needs a fixed graph");
      return tape.constant(fixed_);
    case GraphMode::icdf:
    case GraphMode::gumbel:
      return posterior_.sample_graph(params[layout().logits],
                                     posterior_.draw_noise(seed, step, replica));
  }
  return {};
}

Var GlobalModel::inference_graph(Tape& tape, std::span<const Var> params, std::uint64_t seed) const {
  if (!is_learned(cfg_.graph)) return training_graph(tape, params, seed, 0);
  if (cfg_.sample_at_inference) {
    return posterior_.sample_graph(params[layout().logits],
                                   posterior_.draw_noise(seed, ~std::uint64_t{0}));
  }
  const Matrix theta =
      GraphPosterior::probabilities(params[layout().logits].value(), posterior_.options());
  return tape.constant(normalize_adjacency(theta));
}

Var GlobalModel::graph_from_noise(std::span<const Var> params, const EdgeNoise& noise) const {
  if (!is_learned(cfg_.graph)) throw ContractError("graph_from_noise: graph is not learned");
  return posterior_.sample_graph(params[layout().logits], noise);
}

Var GlobalModel::logits(std::span<const Var> params, std::span<const Var> latents,
                        Var graph) const {
  const Layout l = layout();
  if (params.size() != l.align + l.n_align + (l.has_logits ? 1 : 0)) {
    throw ContractError("GlobalModel::logits: unexpected parameter count " +
                        std::to_string(params.size()));
  }
  const std::size_t n = clients();
  if (latents.size() != n) {
    throw ShapeError("GlobalModel::logits: " + std::to_string(latents.size()) +
                     " latent blocks for " + std::to_string(n) + " clients");
  }
  const std::size_t m = latents[0].rows();
  if (m == 0) throw ContractError("GlobalModel::logits: no samples");
  for (std::size_t i = 0; i < n; ++i) {
    if (latents[i].rows() != m || latents[i].cols() != alignment_.latent_dim()) {
      throw ShapeError("GlobalModel::logits: client " + std::to_string(i) + " latents " +
                       latents[i].value().shape_str() + ", expected " +
                       shape_str(m, alignment_.latent_dim()));
    }
  }
  Tape& t = *params[0].tape();
  Var stacked;
  if (alignment_.mode() == AlignmentMode::none) {
    stacked = vstack(latents);
  } else {
    const auto P = alignment_.effective(t, params.subspan(l.align, l.n_align));
    stacked = apply_alignment(P, latents);
  }
  const std::size_t hid = cfg_.hidden;
  const Var W0v = params[l.W0];
  const Var W1v = params[l.W1];

  if (cfg_.variant == GlobalVariant::mean_pool) {
    Var z = matmul(stacked, W0v);
    if (l.bias) z = add_row_broadcast(z, params[l.b0]);
    z = relu(z);
    const Var pooled = reshape(mean_rows(reshape(z, n, m * hid)), m, hid);
    Var out = matmul(pooled, W1v);
    if (l.bias) out = add_row_broadcast(out, params[l.b1]);
    return out;
  }

  Var x = reshape(matmul(stacked, W0v), n, m * hid);
  if (graph.valid()) x = matmul(graph, x);
  x = relu(x);
  if (graph.valid()) x = matmul(graph, x);
  if (l.has_skip) x = add(x, reshape(matmul(stacked, params[l.skip]), n, m * hid));
  return matmul(reshape(mean_rows(x), m, hid), W1v);
}

Var f3_loss(const GlobalModel& gm, std::span<const Var> params, std::span<const Var> latents,
            std::span<const int> labels, std::uint64_t seed, std::uint64_t step) {
  if (latents.empty() || latents[0].rows() == 0) throw ContractError("f3_loss: empty bundle");
  if (labels.size() != latents[0].rows()) {
    throw ShapeError("f3_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(latents[0].rows()) + " samples");
  }
  Tape& t = *params[0].tape();
  const std::size_t S = is_learned(gm.config().graph) ? gm.config().graph_samples : 1;
  Var total;
  for (std::size_t s = 0; s < S; ++s) {
    const Var g = gm.training_graph(t, params, seed, step, s);
    const Var loss = cross_entropy(softmax_rows(gm.logits(params, latents, g)), labels);
    total = s == 0 ? loss : add(total, loss);
  }
  return S == 1 ? total : scale(total, 1.0 / static_cast<double>(S));
}

Matrix global_predict(const GlobalModel& gm, std::span<const Matrix> latents, std::uint64_t seed) {
  Tape t;
  const std::vector<Var> params = gm.bind(t, false);
  std::vector<Var> lat;
  for (const Matrix& m : latents) lat.push_back(t.constant(m));
  const Var g = gm.inference_graph(t, params, seed);
  return softmax_rows(gm.logits(params, lat, g)).value();
}

nlohmann::json GlobalModel::to_json() const {
  nlohmann::json j = {
      {"format", "f3-global"},
      {"format_version", 1},
      {"variant", std::string(to_string(cfg_.variant))},
      {"hidden", cfg_.hidden},
      {"classes", cfg_.classes},
      {"skip", cfg_.skip},
      {"use_bias", cfg_.use_bias},
      {"graph", std::string(to_string(cfg_.graph))},
      {"posterior", posterior_options_json(cfg_.posterior)},
      {"graph_samples", cfg_.graph_samples},
      {"sample_at_inference", cfg_.sample_at_inference},
      {"W0", matrix_to_json(W0)},
      {"W1", matrix_to_json(W1)},
      {"b0", matrix_to_json(b0)},
      {"b1", matrix_to_json(b1)},
      {"W_skip", matrix_to_json(W_skip)},
      {"alignment", alignment_.to_json()},
      {"fixed_graph", matrix_to_json(fixed_)},
  };
  if (is_learned(cfg_.graph)) j["edge_logits"] = matrix_to_json(posterior_.logits());
  return j;
}

GlobalModel GlobalModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "f3-global") throw FormatError("not a global model checkpoint");
    if (j.at("format_version").get<int>() != 1) {
      throw FormatError("global model checkpoint version " +
                        std::to_string(j.at("format_version").get<int>()) + " is not supported");
    }
    GlobalModel gm;
    gm.cfg_.variant = global_variant_from_string(j.at("variant").get<std::string>());
    gm.cfg_.hidden = j.at("hidden").get<std::size_t>();
    gm.cfg_.classes = j.at("classes").get<std::size_t>();
    gm.cfg_.skip = j.at("skip").get<bool>();
    gm.cfg_.use_bias = j.at("use_bias").get<bool>();
    gm.cfg_.graph = graph_mode_from_string(j.at("graph").get<std::string>());
    gm.cfg_.posterior = posterior_options_from_json(j.at("posterior"));
    gm.cfg_.graph_samples = j.at("graph_samples").get<std::size_t>();
    gm.cfg_.sample_at_inference = j.at("sample_at_inference").get<bool>();
    gm.W0 = matrix_from_json(j.at("W0"));
    gm.W1 = matrix_from_json(j.at("W1"));
    gm.b0 = matrix_from_json(j.at("b0"));
    gm.b1 = matrix_from_json(j.at("b1"));
    gm.W_skip = matrix_from_json(j.at("W_skip"));
    gm.alignment_ = AlignmentSet::from_json(j.at("alignment"));
    gm.fixed_ = matrix_from_json(j.at("fixed_graph"));
    if (is_learned(gm.cfg_.graph)) {
      gm.posterior_ = GraphPosterior(gm.clients(), gm.cfg_.posterior);
      gm.posterior_.logits() = matrix_from_json(j.at("edge_logits"));
    }
    return gm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("global model checkpoint: ") + e.what());
  }
}

std::string theta_csv(const GlobalModel& gm) {
  std::string out = "row,col,theta\n";
  if (!is_learned(gm.config().graph)) return out;
  const Matrix p = gm.posterior().probabilities();
  char buf[80];
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", i, j, p(i, j));
      out += buf;
    }
  }
  return out;
}

}  // namespace f3
