// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/config.hpp"

#include <algorithm>
#include <array>
#include <initializer_list>

#include "f3/numcore/errors.hpp"

namespace f3 {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<VariantId, std::string_view>, 9> kNames{{
    {VariantId::B_majority, "B_majority"},
    {VariantId::D_best_model, "D_best_model"},
    {VariantId::E_mean_pool, "E_mean_pool"},
    {VariantId::G_concat, "G_concat"},
    {VariantId::H_no_align, "H_no_align"},
    {VariantId::J_tied, "J_tied"},
    {VariantId::K_align, "K_align"},
    {VariantId::L_vfl_graph_align, "L_vfl_graph_align"},
    {VariantId::M_vfl_scratch, "M_vfl_scratch"},
}};

// Unknown keys are almost always typos; fail before anything runs.
void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

VariantConfig variant_from_json(const json& j) {
  VariantConfig v;
  if (j.is_string()) {
    v.id = variant_from_string(j.get<std::string>());
    return v;
  }
  check_keys(j, "variant", {"id", "graph", "kappa"});
  v.id = variant_from_string(j.at("id").get<std::string>());
  if (j.contains("graph")) v.graph = graph_mode_from_string(j.at("graph").get<std::string>());
  v.kappa = j.value("kappa", v.kappa);
  return v;
}

}  // namespace

std::string_view to_string(VariantId v) {
  for (const auto& [id, name] : kNames) {
    if (id == v) return name;
  }
  return "unknown";
}

VariantId variant_from_string(std::string_view name) {
  for (const auto& [id, full] : kNames) {
    if (name == full || name == full.substr(0, 1)) return id;
  }
  throw ValidationError("unknown variant '" + std::string(name) + "'");
}

std::string VariantConfig::label() const {
  std::string s(to_string(id));
  if (uses_gcn(id) && graph != GraphMode::icdf) s += "/" + std::string(to_string(graph));
  return s;
}

std::vector<VariantConfig> ExperimentConfig::all_variants() {
  std::vector<VariantConfig> out;
  for (const auto& [id, _] : kNames) out.push_back(VariantConfig{.id = id});
  return out;
}

json ExperimentConfig::to_json() const {
  json variants_j = json::array();
  for (const auto& v : variants) {
    variants_j.push_back({{"id", std::string(f3::to_string(v.id))},
                          {"graph", std::string(f3::to_string(v.graph))},
                          {"kappa", v.kappa}});
  }
  json training{{"max_epochs", global.max_epochs},
                {"patience", global.patience},
                {"learning_rates", global.learning_rates}};
  training["vfl_local_lr"] = vfl_local_lr ? json(*vfl_local_lr) : json(nullptr);
  json j{{"version", kVersion},
         {"variants", variants_j},
         {"alignment",
          {{"mode", std::string(f3::to_string(alignment))},
           {"out_dim", aligned_dim},
           {"sinkhorn_iterations", sinkhorn_iterations}}},
         {"sampler",
          {{"tau", sampler.tau},
           {"reference", std::string(f3::to_string(sampler.reference))},
           {"sigma", sampler.sigma},
           {"symmetric", sampler.symmetric},
           {"self_loop", sampler.self_loop},
           {"samples_per_step", sampler.samples_per_step},
           {"sample_at_inference", sampler.sample_at_inference},
           {"logit_lr", sampler.logit_lr ? json(*sampler.logit_lr) : json(nullptr)}}},
         {"model", {{"latent_dim", latent_dim}, {"hidden", hidden}, {"skip", skip}, {"pool_bias", pool_bias}}},
         {"pretrain", {{"epochs", pretrain_epochs}, {"lr", pretrain_lr}}},
         {"training", training},
         {"seeds", seeds},
         {"threads", threads},
         {"out_dir", out_dir}};
  if (dataset_path.empty()) {
    SyntheticSpec effective = dataset;
    effective.latent_dim = latent_dim;  // the model's latent size wins
    j["dataset"] = effective.to_json();
  } else {
    j["dataset_path"] = dataset_path;
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, "config", {"version", "dataset", "dataset_path", "variants", "alignment", "sampler",
                             "model", "pretrain", "training", "seeds", "threads", "out_dir"});
    const int version = j.value("version", kVersion);
    if (version != kVersion) {
      throw ValidationError("config: version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kVersion) + ")");
    }
    if (j.contains("dataset") && j.contains("dataset_path")) {
      throw ValidationError("config: give either dataset or dataset_path, not both");
    }
    if (j.contains("dataset")) {
      check_keys(j["dataset"], "dataset",
                 {"clients", "samples", "classes", "graph", "block_size", "edge_prob", "event_size",
                  "conflict", "missing", "plant_permutations", "latent_dim", "gru_every", "fc_input_dim",
                  "seq_len", "seq_channels", "noise", "seed"});
      c.dataset = SyntheticSpec::from_json(j["dataset"]);
    }
    c.dataset_path = j.value("dataset_path", c.dataset_path);

    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_json(v));
    } else {
      c.variants = all_variants();
    }
    if (j.contains("alignment")) {
      const json& a = j["alignment"];
      check_keys(a, "alignment", {"mode", "out_dim", "sinkhorn_iterations"});
      if (a.contains("mode")) c.alignment = alignment_mode_from_string(a["mode"].get<std::string>());
      c.aligned_dim = a.value("out_dim", c.aligned_dim);
      c.sinkhorn_iterations = a.value("sinkhorn_iterations", c.sinkhorn_iterations);
    }
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      check_keys(s, "sampler", {"tau", "reference", "sigma", "symmetric", "self_loop", "samples_per_step",
                                "sample_at_inference", "logit_lr"});
      c.sampler.tau = s.value("tau", c.sampler.tau);
      if (s.contains("reference")) c.sampler.reference = reference_kind_from_string(s["reference"].get<std::string>());
      c.sampler.sigma = s.value("sigma", c.sampler.sigma);
      c.sampler.symmetric = s.value("symmetric", c.sampler.symmetric);
      c.sampler.self_loop = s.value("self_loop", c.sampler.self_loop);
      c.sampler.samples_per_step = s.value("samples_per_step", c.sampler.samples_per_step);
      c.sampler.sample_at_inference = s.value("sample_at_inference", c.sampler.sample_at_inference);
      if (s.contains("logit_lr") && !s["logit_lr"].is_null()) c.sampler.logit_lr = s["logit_lr"].get<double>();
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      check_keys(m, "model", {"latent_dim", "hidden", "skip", "pool_bias"});
      c.latent_dim = m.value("latent_dim", c.latent_dim);
      c.hidden = m.value("hidden", c.hidden);
      c.skip = m.value("skip", c.skip);
      c.pool_bias = m.value("pool_bias", c.pool_bias);
    }
    if (j.contains("pretrain")) {
      const json& p = j["pretrain"];
      check_keys(p, "pretrain", {"epochs", "lr"});
      c.pretrain_epochs = p.value("epochs", c.pretrain_epochs);
      c.pretrain_lr = p.value("lr", c.pretrain_lr);
    }
    if (j.contains("training")) {
      const json& t = j["training"];
      check_keys(t, "training", {"max_epochs", "patience", "learning_rates", "vfl_local_lr"});
      c.global.max_epochs = t.value("max_epochs", c.global.max_epochs);
      c.global.patience = t.value("patience", c.global.patience);
      if (t.contains("learning_rates")) c.global.learning_rates = t["learning_rates"].get<std::vector<double>>();
      if (t.contains("vfl_local_lr") && !t["vfl_local_lr"].is_null()) c.vfl_local_lr = t["vfl_local_lr"].get<double>();
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.threads = j.value("threads", c.threads);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.dataset.latent_dim = c.latent_dim;
  return c;
}

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) dataset.validate();
  if (variants.empty()) throw ValidationError("config: no variants selected");
  if (seeds.empty()) throw ValidationError("config: no seeds");
  if (threads == 0) throw ValidationError("config: threads must be at least 1");
  if (latent_dim == 0 || hidden == 0) throw ValidationError("config: latent_dim and hidden must be positive");
  if (pretrain_epochs < 0) throw ValidationError("config: pretrain epochs must be non-negative");
  if (!(pretrain_lr > 0.0)) throw ValidationError("config: pretrain lr must be positive");
  if (global.learning_rates.empty()) throw ValidationError("config: no learning rates");
  for (double lr : global.learning_rates) {
    if (!(lr > 0.0)) throw ValidationError("config: learning rates must be positive");
  }
  if (global.patience < 1 || global.max_epochs < 0) throw ValidationError("config: bad early-stopping settings");
  if (vfl_local_lr && !(*vfl_local_lr >= 0.0)) throw ValidationError("config: vfl_local_lr must be >= 0");
  if (sampler.logit_lr && !(*sampler.logit_lr > 0.0)) throw ValidationError("config: logit_lr must be positive");
  if (!(sampler.tau > 0.0)) throw ValidationError("config: tau must be positive");
  if (!(sampler.sigma > 0.0)) throw ValidationError("config: sigma must be positive");
  if (sampler.samples_per_step == 0) throw ValidationError("config: samples_per_step must be at least 1");
  if (sampler.self_loop < 0.0 || sampler.self_loop > 1.0) throw ValidationError("config: self_loop must lie in [0, 1]");
  if (sinkhorn_iterations == 0) throw ValidationError("config: sinkhorn_iterations must be at least 1");
  const std::size_t out = aligned_dim == 0 ? latent_dim : aligned_dim;
  if (alignment == AlignmentMode::hard && out != latent_dim) {
    throw ValidationError("config: hard alignment needs out_dim equal to latent_dim");
  }
  if (alignment == AlignmentMode::none && out != latent_dim) {
    throw ValidationError("config: alignment none needs out_dim equal to latent_dim");
  }
  const std::size_t n = dataset_path.empty() ? dataset.clients : 0;
  for (const auto& v : variants) {
    if (!uses_gcn(v.id)) continue;
    if (v.graph == GraphMode::knn && (v.kappa == 0 || (n != 0 && v.kappa >= n))) {
      throw ValidationError("config: " + v.label() + " needs 0 < kappa < clients");
    }
  }
}

}  // namespace f3
