// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "f3/federation/baselines.hpp"
#include "f3/federation/bundle.hpp"
#include "f3/federation/metrics.hpp"
#include "f3/federation/parallel.hpp"
#include "f3/graphsampler/adjacency.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"
#include "f3/synthdata/dataset.hpp"

namespace f3 {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Seed streams. Every GCN-family variant in a run shares the same global
// initialization and graph noise, so differences between them come from the
// variant alone.
constexpr std::uint64_t kLocalInit = 0x10ca1;
constexpr std::uint64_t kGlobalInit = 0x9b0b;
constexpr std::uint64_t kAlignInit = 0xa119;
constexpr std::uint64_t kGraphNoise = 0x6e015e;
constexpr std::uint64_t kKnnMap = 0x4a11;
constexpr std::uint64_t kConcatInit = 0xc0ca7;
constexpr std::uint64_t kSplit = 0x5b117;

struct Context {
  Context(const ExperimentConfig& c, std::uint64_t s, const Dataset& ds) : cfg(c), seed(s), data(ds) {}

  const ExperimentConfig& cfg;
  std::uint64_t seed = 0;
  const Dataset& data;
  std::size_t d = 0;
  std::size_t classes = 0;
  std::vector<Split> split;
  std::vector<std::size_t> train_ids, val_ids, test_ids;
  std::vector<int> y_train, y_val, y_test;
  std::vector<LocalClient> pretrained;
};

std::vector<int> pick(std::span<const int> v, std::span<const std::size_t> ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (std::size_t k : ids) out.push_back(v[k]);
  return out;
}

std::vector<LocalClient> fresh_clients(const Context& ctx) {
  std::vector<LocalClient> out;
  for (std::size_t i = 0; i < ctx.data.clients(); ++i) {
    out.push_back(LocalClient::create(i, ctx.data.kinds[i], ctx.data.input_dims[i], ctx.d, ctx.classes,
                                      ctx.data.shards[i], hash_keys(ctx.seed, kLocalInit)));
  }
  return out;
}

void score(MetricsReport& r, const Context& ctx, std::span<const int> pred, const Matrix& probs) {
  r.f1 = macro_f1(ctx.y_test, pred, ctx.classes);
  r.auc = macro_auc(ctx.y_test, probs);
}

void record_transfers(MetricsReport& r, const TransferLog& log) {
  r.out_per_client = log.out();
  r.in_per_client = log.in();
  r.transfers_out = log.total_out();
  r.transfers_in = log.total_in();
}

void record_training(MetricsReport& r, const TrainResult& t) {
  r.epochs_run = t.epochs_run;
  r.lr = t.lr;
  r.best_val_loss = t.best_val_loss;
}

// ---- B and D: decisions made from local predictions alone ----

MetricsReport run_majority(const Context& ctx, MetricsReport r) {
  TransferLog log(ctx.data.clients());
  const LocalPredictions lp = collect_predictions(ctx.pretrained, log);
  std::vector<std::vector<int>> sub;
  for (const auto& p : lp.predicted) sub.push_back(pick(p, ctx.test_ids));
  score(r, ctx, majority_vote(sub, ctx.classes), vote_shares(sub, ctx.classes));
  record_transfers(r, log);
  return r;
}

MetricsReport run_best_model(const Context& ctx, MetricsReport r) {
  TransferLog log(ctx.data.clients());
  const LocalPredictions lp = collect_predictions(ctx.pretrained, log);
  const BestModelChoice choice = best_model_selection(lp, ctx.data.labels, ctx.val_ids);
  const auto [pred, probs] = best_model_outputs(lp, choice, ctx.test_ids);
  score(r, ctx, pred, probs);
  r.chosen_client = choice.client;
  record_transfers(r, log);
  return r;
}

// ---- G: concatenated latents into one softmax layer ----

Matrix hconcat(std::span<const Matrix> parts) {
  std::size_t cols = 0;
  for (const Matrix& p : parts) cols += p.cols();
  const std::size_t rows = parts.empty() ? 0 : parts[0].rows();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t c0 = 0;
    for (const Matrix& p : parts) {
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, c0 + c) = p(r, c);
      c0 += p.cols();
    }
  }
  return out;
}

Matrix concat_probs(const Matrix& x, const Matrix& W, const Matrix& b) {
  Tape tape;
  const Var z = add_row_broadcast(matmul(tape.constant(x), tape.constant(W)), tape.constant(b));
  return softmax_rows(z.value());
}

MetricsReport run_concat(const Context& ctx, MetricsReport r) {
  TransferLog log(ctx.data.clients());
  const RepresentationBundle bundle = collect_bundle(ctx.pretrained, ctx.data.labels, ctx.split, log);
  const Matrix x_train = hconcat(bundle.rows(ctx.train_ids));
  const Matrix x_val = hconcat(bundle.rows(ctx.val_ids));
  const Matrix x_test = hconcat(bundle.rows(ctx.test_ids));

  const CounterRng rng(hash_keys(ctx.seed, kConcatInit));
  const double a = 1.0 / std::sqrt(static_cast<double>(x_train.cols()));
  Matrix W(x_train.cols(), ctx.classes);
  for (std::size_t k = 0; k < W.size(); ++k) W[k] = a * (2.0 * rng.uniform(1, k) - 1.0);
  Matrix b(1, ctx.classes);

  Trainable t;
  t.params = {&W, &b};
  t.train_loss = [&](Tape& tape, std::span<const Var> v, std::uint64_t) {
    const Var z = add_row_broadcast(matmul(tape.constant(x_train), v[0]), v[1]);
    return cross_entropy(softmax_rows(z), ctx.y_train);
  };
  t.val_loss = [&] { return cross_entropy(concat_probs(x_val, W, b), ctx.y_val); };
  record_training(r, fit(t, ctx.cfg.global));

  const Matrix probs = concat_probs(x_test, W, b);
  score(r, ctx, argmax_rows(probs), probs);
  record_transfers(r, log);
  return r;
}

// ---- GCN family ----

GlobalModel make_global(const Context& ctx, const VariantConfig& vc) {
  const ExperimentConfig& cfg = ctx.cfg;
  GlobalModelConfig gc;
  gc.variant = vc.id == VariantId::E_mean_pool ? GlobalVariant::mean_pool : GlobalVariant::gcn;
  gc.hidden = cfg.hidden;
  gc.classes = ctx.classes;
  gc.skip = cfg.skip;
  gc.use_bias = cfg.pool_bias;
  gc.graph = vc.id == VariantId::E_mean_pool ? GraphMode::none : vc.graph;
  gc.posterior.tau = cfg.sampler.tau;
  gc.posterior.ref = ReferenceDistribution(cfg.sampler.reference, cfg.sampler.sigma);
  gc.posterior.symmetric = cfg.sampler.symmetric;
  gc.posterior.self_loop = cfg.sampler.self_loop;
  gc.graph_samples = cfg.sampler.samples_per_step;
  gc.sample_at_inference = cfg.sampler.sample_at_inference;

  AlignmentMode mode = cfg.alignment;
  if (vc.id == VariantId::E_mean_pool || vc.id == VariantId::H_no_align) mode = AlignmentMode::none;
  if (vc.id == VariantId::J_tied) mode = AlignmentMode::tied;
  const std::size_t out =
      mode == AlignmentMode::none || cfg.aligned_dim == 0 ? ctx.d : cfg.aligned_dim;
  AlignmentSet align = AlignmentSet::create(mode, ctx.data.clients(), ctx.d, out,
                                            hash_keys(ctx.seed, kAlignInit), 0.01, cfg.sinkhorn_iterations);
  GlobalModel gm = GlobalModel::create(gc, std::move(align), hash_keys(ctx.seed, kGlobalInit));
  if (gc.graph == GraphMode::given) gm.set_fixed_graph(normalize_adjacency(ctx.data.graph));
  return gm;
}

std::vector<Var> constants(Tape& tape, std::span<const Matrix> ms) {
  std::vector<Var> out;
  out.reserve(ms.size());
  for (const Matrix& m : ms) out.push_back(tape.constant(m));
  return out;
}

MetricsReport finish_global(const Context& ctx, MetricsReport r, const GlobalModel& gm,
                            std::span<const Matrix> test_latents, std::uint64_t noise_seed) {
  const Matrix probs = global_predict(gm, test_latents, noise_seed);
  score(r, ctx, argmax_rows(probs), probs);
  r.rng_draws = gm.posterior().draws();
  return r;
}

// Edge logits are the last global parameter when the graph is learned.
std::vector<std::optional<double>> global_rates(const Context& ctx, const GlobalModel& gm) {
  std::vector<std::optional<double>> rates(gm.parameters().size());
  if (is_learned(gm.config().graph) && ctx.cfg.sampler.logit_lr) rates.back() = ctx.cfg.sampler.logit_lr;
  return rates;
}

MetricsReport run_bundle_gcn(const Context& ctx, const VariantConfig& vc, MetricsReport r, GlobalModel& gm) {
  TransferLog log(ctx.data.clients());
  const RepresentationBundle bundle = collect_bundle(ctx.pretrained, ctx.data.labels, ctx.split, log);
  bundle.require_coverage();
  if (vc.graph == GraphMode::knn && vc.id != VariantId::E_mean_pool) {
    gm.set_fixed_graph(knn_graph(bundle, vc.kappa, ctx.train_ids, hash_keys(ctx.seed, kKnnMap)));
  }
  const std::vector<Matrix> tr = bundle.rows(ctx.train_ids);
  const std::vector<Matrix> va = bundle.rows(ctx.val_ids);
  const std::vector<Matrix> te = bundle.rows(ctx.test_ids);
  const std::uint64_t noise_seed = hash_keys(ctx.seed, kGraphNoise);

  Trainable t;
  t.params = gm.parameters();
  t.fixed_lr = global_rates(ctx, gm);
  t.train_loss = [&](Tape& tape, std::span<const Var> vars, std::uint64_t step) {
    const std::vector<Var> lat = constants(tape, tr);
    return f3_loss(gm, vars, lat, ctx.y_train, noise_seed, step);
  };
  t.val_loss = [&] { return cross_entropy(global_predict(gm, va, noise_seed), ctx.y_val); };
  record_training(r, fit(t, ctx.cfg.global));
  record_transfers(r, log);
  return finish_global(ctx, std::move(r), gm, te, noise_seed);
}

// ---- L and M: local encoders trained through the global loss ----

// Rows a client holds for one split, and where they land in that split.
struct SplitRows {
  std::vector<Matrix> x;
  std::vector<std::vector<std::size_t>> pos;
  std::size_t m = 0;
};

SplitRows gather(std::span<const LocalClient> clients, std::span<const std::size_t> ids) {
  SplitRows s;
  s.m = ids.size();
  for (const LocalClient& c : clients) {
    const Matrix& all = c.shard.rows();
    std::vector<std::size_t> rows, pos;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t p = c.shard.position(ids[k]);
      if (p == ClientShard::npos) continue;
      rows.push_back(p);
      pos.push_back(k);
    }
    s.x.push_back(select_rows(all, rows));
    s.pos.push_back(std::move(pos));
  }
  return s;
}

std::vector<Matrix> plain_latents(std::span<const LocalClient> clients, const SplitRows& s, std::size_t d) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    Matrix full(s.m, d);
    if (s.x[i].rows() > 0) {
      const Matrix h = embed(clients[i].embedding, s.x[i]);
      for (std::size_t r = 0; r < h.rows(); ++r) {
        const auto src = h.row_span(r);
        std::copy(src.begin(), src.end(), full.row_span(s.pos[i][r]).begin());
      }
    }
    out.push_back(std::move(full));
  }
  return out;
}

MetricsReport run_vfl(const Context& ctx, const VariantConfig& vc, MetricsReport r, GlobalModel& gm) {
  const std::size_t n = ctx.data.clients();
  std::vector<LocalClient> clients =
      vc.id == VariantId::M_vfl_scratch ? fresh_clients(ctx) : ctx.pretrained;
  if (vc.graph == GraphMode::knn) {
    // Built from the starting encoders; the first training step ships the same latents.
    TransferLog scratch(n);
    const RepresentationBundle b = collect_bundle(clients, ctx.data.labels, ctx.split, scratch);
    gm.set_fixed_graph(knn_graph(b, vc.kappa, ctx.train_ids, hash_keys(ctx.seed, kKnnMap)));
  }
  const SplitRows tr = gather(clients, ctx.train_ids);
  const SplitRows va = gather(clients, ctx.val_ids);
  const SplitRows te = gather(clients, ctx.test_ids);
  const std::uint64_t noise_seed = hash_keys(ctx.seed, kGraphNoise);

  Trainable t;
  t.params = gm.parameters();
  const std::size_t n_global = t.params.size();
  t.fixed_lr = global_rates(ctx, gm);
  std::vector<std::size_t> first_local;
  for (LocalClient& c : clients) {
    first_local.push_back(t.params.size());
    for (Matrix* p : parameters(c.embedding)) t.params.push_back(p);
  }
  first_local.push_back(t.params.size());
  t.fixed_lr.resize(t.params.size(), ctx.cfg.vfl_local_lr);

  TransferLog log(n);
  t.train_loss = [&](Tape& tape, std::span<const Var> vars, std::uint64_t step) {
    std::vector<Var> lat;
    for (std::size_t i = 0; i < n; ++i) {
      if (tr.x[i].rows() == 0) {
        lat.push_back(tape.constant(Matrix(tr.m, ctx.d)));
        continue;
      }
      const auto local = vars.subspan(first_local[i], first_local[i + 1] - first_local[i]);
      lat.push_back(scatter_rows(embed(clients[i].embedding, local, tr.x[i]), tr.pos[i], tr.m));
    }
    return f3_loss(gm, vars.first(n_global), lat, ctx.y_train, noise_seed, step);
  };
  // Each step: latents up, latent gradients down, for every client.
  t.on_step = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      log.outbound(i);
      log.inbound(i);
    }
  };
  t.val_loss = [&] {
    return cross_entropy(global_predict(gm, plain_latents(clients, va, ctx.d), noise_seed), ctx.y_val);
  };
  record_training(r, fit(t, ctx.cfg.global));
  for (std::size_t i = 0; i < n; ++i) log.outbound(i);  // test-time upload
  record_transfers(r, log);
  return finish_global(ctx, std::move(r), gm, plain_latents(clients, te, ctx.d), noise_seed);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json MetricsReport::deterministic_json() const {
  json j{{"variant", variant},
         {"graph_mode", graph_mode},
         {"alignment", alignment},
         {"seed", seed},
         {"f1", f1},
         {"auc", std::isnan(auc) ? json(nullptr) : json(auc)},
         {"epochs_run", epochs_run},
         {"transfers_out", transfers_out},
         {"transfers_in", transfers_in},
         {"out_per_client", out_per_client},
         {"in_per_client", in_per_client},
         {"lr", lr},
         {"best_val_loss", best_val_loss},
         {"rng_draws", rng_draws}};
  j["chosen_client"] = chosen_client ? json(*chosen_client) : json(nullptr);
  return j;
}

json MetricsReport::to_json() const {
  json j = deterministic_json();
  j["wall_clock_s"] = wall_clock_s;
  return j;
}

std::string MetricsReport::csv_header() {
  return "variant,graph_mode,alignment,seed,f1,auc,epochs_run,transfers_out,transfers_in,lr,"
         "best_val_loss,rng_draws,chosen_client,wall_clock_s";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os << variant << ',' << graph_mode << ',' << alignment << ',' << seed << ',' << fmt_double(f1) << ','
     << fmt_double(auc) << ',' << epochs_run << ',' << transfers_out << ',' << transfers_in << ','
     << fmt_double(lr) << ',' << fmt_double(best_val_loss) << ',' << rng_draws << ','
     << (chosen_client ? std::to_string(*chosen_client) : std::string()) << ',' << fmt_double(wall_clock_s);
  return os.str();
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset data;
  if (cfg.dataset_path.empty()) {
    SyntheticSpec spec = cfg.dataset;
    spec.latent_dim = cfg.latent_dim;
    spec.seed = cfg.dataset.seed + seed;
    data = generate(spec);
  } else {
    data = import_dataset(cfg.dataset_path);
  }
  for (const auto& p : data.permutations) {
    if (p.size() != cfg.latent_dim) {
      throw ValidationError("dataset permutations have length " + std::to_string(p.size()) +
                            " but latent_dim is " + std::to_string(cfg.latent_dim));
    }
  }
  for (const auto& v : cfg.variants) {
    if (uses_gcn(v.id) && v.graph == GraphMode::knn && v.kappa >= data.clients()) {
      throw ValidationError(v.label() + ": kappa must be below the client count");
    }
  }

  Context ctx(cfg, seed, data);
  ctx.d = cfg.latent_dim;
  ctx.classes = data.spec.classes;
  ctx.split = stratified_split(data.labels, ctx.classes, hash_keys(seed, kSplit));
  ctx.train_ids = split_indices(ctx.split, Split::train);
  ctx.val_ids = split_indices(ctx.split, Split::val);
  ctx.test_ids = split_indices(ctx.split, Split::test);
  ctx.y_train = pick(data.labels, ctx.train_ids);
  ctx.y_val = pick(data.labels, ctx.val_ids);
  ctx.y_test = pick(data.labels, ctx.test_ids);

  PipelineResult result;
  bool need_pretrained = false;
  for (const auto& v : cfg.variants) need_pretrained |= v.id != VariantId::M_vfl_scratch;
  if (need_pretrained) {
    ctx.pretrained = fresh_clients(ctx);
    std::vector<std::uint8_t> train_mask(data.samples(), 0);
    for (std::size_t k : ctx.train_ids) train_mask[k] = 1;
    const PretrainConfig pc{.epochs = cfg.pretrain_epochs, .adam = AdamConfig{.lr = cfg.pretrain_lr}};
    parallel_for(ctx.pretrained.size(), cfg.threads, [&](std::size_t i) {
      LocalClient& c = ctx.pretrained[i];
      c.shard.reset_audit();
      pretrain_local(c, data.labels, pc, train_mask);
      if (!data.permutations.empty()) {
        auto [e, h] = permute(c.embedding, c.head, data.permutations[i]);
        c.embedding = std::move(e);
        c.head = std::move(h);
      }
    });
    for (const LocalClient& c : ctx.pretrained) result.pretrain_bytes_read.push_back(c.shard.bytes_read());
    TransferLog scratch(data.clients());
    result.entropy = entropy_diagnostic(collect_predictions(ctx.pretrained, scratch).predicted, ctx.classes);
  }

  const std::size_t nv = cfg.variants.size();
  std::vector<MetricsReport> reports(nv);
  std::vector<GlobalModel> models(nv);
  std::vector<bool> has_model(nv, false);
  parallel_for(nv, cfg.threads, [&](std::size_t k) {
    const VariantConfig& vc = cfg.variants[k];
    const auto start = Clock::now();
    MetricsReport r;
    r.variant = vc.label();
    r.seed = seed;
    r.graph_mode = uses_gcn(vc.id) ? std::string(to_string(vc.graph)) : "none";
    switch (vc.id) {
      case VariantId::B_majority: r = run_majority(ctx, std::move(r)); break;
      case VariantId::D_best_model: r = run_best_model(ctx, std::move(r)); break;
      case VariantId::G_concat: r = run_concat(ctx, std::move(r)); break;
      default: {
        GlobalModel gm = make_global(ctx, vc);
        r.alignment = std::string(to_string(gm.alignment().mode()));
        r = is_vfl(vc.id) ? run_vfl(ctx, vc, std::move(r), gm) : run_bundle_gcn(ctx, vc, std::move(r), gm);
        models[k] = std::move(gm);
        has_model[k] = true;
      }
    }
    if (r.alignment.empty()) r.alignment = "none";
    r.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
    reports[k] = std::move(r);
  });

  result.reports = std::move(reports);
  for (std::size_t k = 0; k < nv; ++k) {
    if (has_model[k]) result.models.emplace_back(result.reports[k].variant, std::move(models[k]));
  }
  result.clients = std::move(ctx.pretrained);
  return result;
}

}  // namespace f3
