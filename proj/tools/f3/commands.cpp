// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "config_file.hpp"
#include "f3/federation/baselines.hpp"
#include "f3/federation/config.hpp"
#include "f3/federation/parallel.hpp"
#include "f3/federation/pipeline.hpp"
#include "f3/graphsampler/relaxation.hpp"
#include "f3/localmodels/client.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/rng.hpp"
#include "f3/synthdata/dataset.hpp"
#include "f3/verify/suites.hpp"

namespace f3::cli {
namespace fs = std::filesystem;
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

std::string file_label(std::string label) {
  std::replace(label.begin(), label.end(), '/', '_');
  return label;
}

// Config problems are usage errors (exit 2); everything after this point is
// a runtime failure.
std::optional<ExperimentConfig> load_experiment(const std::string& path) {
  try {
    ExperimentConfig cfg = ExperimentConfig::from_json(read_config_file(path));
    cfg.validate();
    return cfg;
  } catch (const ConfigFileError& e) {
    std::cerr << "f3: " << e.what() << "\n";
  } catch (const ValidationError& e) {
    std::cerr << "f3: invalid config '" << path << "': " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "f3: invalid config '" << path << "': " << e.what() << "\n";
  }
  return std::nullopt;
}

void write_seed_artifacts(const fs::path& dir, const ExperimentConfig& cfg,
                          const PipelineResult& res) {
  fs::create_directories(dir / "models");
  fs::create_directories(dir / "clients");

  nlohmann::json metrics = nlohmann::json::array();
  std::string csv = MetricsReport::csv_header() + "\n";
  for (const auto& r : res.reports) {
    metrics.push_back(r.to_json());
    csv += r.csv_row() + "\n";
  }
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(dir / "metrics.csv", csv);

  if (!res.entropy.empty()) {
    const double top = std::log(static_cast<double>(cfg.dataset.classes));
    const auto bins = histogram(res.entropy, 0.0, top, 20);
    write_text(dir / "entropy_hist.csv", histogram_csv(bins));
  }
  for (const auto& [label, gm] : res.models) {
    save_json(dir / "models" / (file_label(label) + ".json"), gm.to_json());
    if (is_learned(gm.config().graph))
      write_text(dir / ("theta_" + file_label(label) + ".csv"), theta_csv(gm));
  }
  for (std::size_t i = 0; i < res.clients.size(); ++i)
    save_json(dir / "clients" / ("client_" + std::to_string(i) + ".json"),
              client_checkpoint(res.clients[i]));
}

}  // namespace

// ---- run ----

int cmd_run(const RunOptions& opt) {
  auto loaded = load_experiment(opt.config);
  if (!loaded) return kUsage;
  ExperimentConfig cfg = std::move(*loaded);
  if (opt.seed) cfg.seeds = {*opt.seed};
  if (opt.out) cfg.out_dir = *opt.out;
  if (opt.threads) cfg.threads = *opt.threads;

  if (opt.dry_run) {
    std::cout << "config ok: " << cfg.variants.size() << " variant(s), " << cfg.seeds.size()
              << " seed(s), " << cfg.dataset.clients << " clients, out_dir " << cfg.out_dir << "\n";
    return kOk;
  }

  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  // Everything needed to reproduce the run, overrides applied.
  save_json(out / "config.json", cfg.to_json());

  // With several seeds the pool fans out over seeds and each run is serial;
  // results do not depend on the split either way.
  const std::size_t outer = cfg.seeds.size() > 1 ? cfg.threads : 1;
  ExperimentConfig inner = cfg;
  if (outer > 1) inner.threads = 1;

  std::vector<PipelineResult> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), outer, [&](std::size_t s) {
    results[s] = run_pipeline(inner, cfg.seeds[s]);
    write_seed_artifacts(out / ("seed_" + std::to_string(cfg.seeds[s])), cfg, results[s]);
  });

  nlohmann::json all = nlohmann::json::array();
  std::string csv = MetricsReport::csv_header() + "\n";
  for (const auto& res : results) {
    for (const auto& r : res.reports) {
      all.push_back(r.to_json());
      csv += r.csv_row() + "\n";
      std::printf("seed %-4llu %-24s f1 %.4f  auc %.4f  epochs %-4d  out %llu in %llu\n",
                  static_cast<unsigned long long>(r.seed), r.variant.c_str(), r.f1, r.auc,
                  r.epochs_run, static_cast<unsigned long long>(r.transfers_out),
                  static_cast<unsigned long long>(r.transfers_in));
    }
  }
  write_text(out / "metrics.json", all.dump(2) + "\n");
  write_text(out / "metrics.csv", csv);
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

// ---- verify ----

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  std::string bound;
  bool passed = false;
};

nlohmann::json to_json(const Check& c) {
  return {{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"passed", c.passed}};
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

std::vector<Check> check_cdf(const CdfSuite& s) {
  std::vector<Check> out;
  for (const auto& c : s.cases) {
    const std::string who = c.method == SamplerKind::icdf
                                ? fmt("icdf/%s", std::string(to_string(c.reference)).c_str())
                                : std::string("gumbel");
    const std::string at = fmt(" theta=%g tau=%g", c.theta, c.tau);
    out.push_back({who + at + " sup-norm", c.sup_norm, "< 0.012", c.sup_norm < 0.012});
    if (c.bounded)
      out.push_back({who + at + " support", c.support_hi - c.support_lo, "cdf 0 below, 1 above",
                     c.boundary_ok});
  }
  return out;
}

std::vector<Check> check_bias(const BiasSuite& rate, const BiasSuite& sign) {
  std::vector<Check> out;
  for (const auto& f : rate.fits) {
    out.push_back({fmt("%s theta=%g log-log slope", std::string(to_string(f.method)).c_str(), f.theta),
                   f.slope, "[1.8, 2.2]", f.slope >= 1.8 && f.slope <= 2.2});
  }
  for (const auto& r : rate.rows) {
    if (r.tau != 0.05) continue;
    const double ratio = r.empirical / r.analytic;
    out.push_back({fmt("%s theta=%g tau=0.05 empirical/analytic", std::string(to_string(r.method)).c_str(),
                       r.theta),
                   ratio, "[0.85, 1.15]", ratio >= 0.85 && ratio <= 1.15});
  }
  for (const auto& r : sign.rows) {
    const std::string who = fmt("%s theta=%g tau=%g", std::string(to_string(r.method)).c_str(), r.theta, r.tau);
    if (r.theta == 0.5) {
      const double z = std::abs(r.empirical) / r.std_error;
      out.push_back({who + " |bias|/stderr", z, "<= 3", z <= 3.0});
    } else {
      const double want = r.theta < 0.5 ? 1.0 : -1.0;
      const double z = want * r.empirical / r.std_error;
      out.push_back({who + " signed bias/stderr", z, "> 3", z > 3.0});
    }
  }
  return out;
}

std::vector<Check> check_sinkhorn(const SinkhornSuite& s) {
  std::vector<Check> out;
  for (const auto& c : s.cases) {
    if (c.name == "random_positive") {
      out.push_back({"random_positive first iteration below 1e-8",
                     static_cast<double>(c.first_below_1e8), "in [0, 50]",
                     c.first_below_1e8 >= 0 && c.first_below_1e8 <= 50});
      out.push_back({fmt("random_positive fitted slope (2 log sigma2 = %.4f)", c.fit.predicted),
                     c.fit.slope, "<= 2 log sigma2 + 0.1",
                     c.fit.sufficient && c.fit.slope <= c.fit.predicted + 0.1});
    } else {
      out.push_back({c.name + " mean per-step ratio", c.mean_ratio, "> 0.99", c.mean_ratio > 0.99});
    }
  }
  return out;
}

struct SuiteOutcome {
  std::vector<Check> checks;
  nlohmann::json data;
  std::string csv;
};

SuiteOutcome run_suite(const std::string& name, const VerifyOptions& opt) {
  SuiteOutcome o;
  if (name == "cdf") {
    CdfSuiteOptions c;
    if (opt.samples) c.samples = *opt.samples;
    if (opt.seed) c.seed = *opt.seed;
    const CdfSuite s = cdf_suite(c);
    o.checks = check_cdf(s);
    o.data = to_json(s);
    o.csv = s.csv();
  } else if (name == "bias") {
    BiasSuiteOptions c;
    c.threads = opt.threads;
    if (opt.samples) c.samples = *opt.samples;
    if (opt.seed) c.seed = *opt.seed;
    const BiasSuite rate = bias_suite(c);
    BiasSuiteOptions sc = c;
    sc.thetas = {0.2, 0.5, 0.8};
    sc.taus = {0.1, 0.5, 1.0};
    sc.fit_rate = false;
    sc.seed = c.seed + 1;
    const BiasSuite sign = bias_suite(sc);
    o.checks = check_bias(rate, sign);
    o.data = {{"rate", to_json(rate)}, {"sign", to_json(sign)}};
    o.csv = rate.csv();
    const std::string s = sign.csv();
    o.csv += s.substr(s.find('\n') + 1);
  } else if (name == "sinkhorn") {
    SinkhornSuiteOptions c;
    if (opt.seed) c.seed = *opt.seed;
    const SinkhornSuite s = sinkhorn_suite(c);
    o.checks = check_sinkhorn(s);
    o.data = to_json(s);
    o.csv = s.csv();
  } else if (name == "permutation") {
    const PermutationSuite s = permutation_suite(100, opt.seed.value_or(4));
    const double worst = std::max(s.max_prob_diff, s.max_latent_diff);
    o.checks = {{"permuted outputs vs original (max abs diff)", worst, "<= 1e-10", worst <= 1e-10}};
    o.data = to_json(s);
    o.csv = "trials,max_prob_diff,max_latent_diff\n" +
            fmt("%zu,%.17g,%.17g\n", s.trials, s.max_prob_diff, s.max_latent_diff);
  } else {
    const GradientSuite s = gradient_suite(opt.seed.value_or(5));
    o.checks = {{"full objective max relative error", s.max_rel_error, "< 1e-4",
                 s.max_rel_error < 1e-4}};
    o.data = to_json(s);
    o.csv = "parameters,entries,max_rel_error\n" +
            fmt("%zu,%zu,%.17g\n", s.parameters, s.entries, s.max_rel_error);
  }
  return o;
}

}  // namespace

int cmd_verify(const VerifyOptions& opt) {
  const std::vector<std::string> suites =
      opt.suite == "all" ? std::vector<std::string>{"cdf", "bias", "sinkhorn", "permutation", "gradcheck"}
                         : std::vector<std::string>{opt.suite};
  if (opt.out) fs::create_directories(*opt.out);

  bool all_passed = true;
  for (const auto& name : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteOutcome o = run_suite(name, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool passed = true;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : o.checks) {
      passed = passed && c.passed;
      checks.push_back(to_json(c));
      std::printf("%s  %-58s %.6g  (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value,
                  c.bound.c_str());
    }
    std::printf("%s suite: %s in %.1f s\n", name.c_str(), passed ? "pass" : "FAIL", secs);
    all_passed = all_passed && passed;

    if (opt.out) {
      const nlohmann::json report = {{"suite", name}, {"passed", passed}, {"seconds", secs},
                                     {"checks", checks}, {"data", o.data}};
      write_text(fs::path(*opt.out) / (name + ".json"), report.dump(2) + "\n");
      write_text(fs::path(*opt.out) / (name + ".csv"), o.csv);
    }
  }
  return all_passed ? kOk : kFailed;
}

// ---- bench ----

int cmd_bench(const BenchOptions& opt) {
  constexpr double kTau = 0.5;
  const ReferenceDistribution ref = ReferenceDistribution::normal();
  std::vector<double> thetas(1024);
  for (std::size_t i = 0; i < thetas.size(); ++i) thetas[i] = (static_cast<double>(i) + 0.5) / 1024.0;

  std::string csv = "sampler,edges,seconds,ns_per_edge,draws,draws_per_edge\n";
  for (const auto n : opt.sizes) {
    for (const SamplerKind kind : {SamplerKind::icdf, SamplerKind::gumbel}) {
      double best = INFINITY;
      std::uint64_t draws = 0;
      volatile double sink = 0.0;
      for (int r = 0; r < opt.repeats; ++r) {
        DrawStream stream(opt.seed, static_cast<std::uint64_t>(r));
        double acc = 0.0;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t k = 0; k < n; ++k) {
          const double th = thetas[k & 1023];
          acc += kind == SamplerKind::icdf ? icdf_sample(th, kTau, ref, stream)
                                           : gumbel_sample(th, kTau, stream);
        }
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        draws = stream.draws();
        sink = sink + acc;
      }
      csv += fmt("%s,%llu,%.6f,%.3f,%llu,%.1f\n", std::string(to_string(kind)).c_str(),
                 static_cast<unsigned long long>(n), best, 1e9 * best / static_cast<double>(n),
                 static_cast<unsigned long long>(draws),
                 static_cast<double>(draws) / static_cast<double>(n));
    }
  }
  if (opt.out)
    write_text(*opt.out, csv);
  else
    std::cout << csv;
  return kOk;
}

// ---- gen-data ----

int cmd_gen_data(const GenDataOptions& opt) {
  SyntheticSpec spec;
  if (opt.config) {
    auto cfg = load_experiment(*opt.config);
    if (!cfg) return kUsage;
    spec = cfg->dataset;
  }
  if (opt.seed) spec.seed = *opt.seed;
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    std::cerr << "f3: invalid dataset spec: " << e.what() << "\n";
    return kUsage;
  }
  const Dataset d = generate(spec);
  if (const auto parent = fs::path(opt.out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  export_dataset(d, opt.out);
  if (opt.csv_dir) {
    fs::create_directories(*opt.csv_dir);
    export_dataset_csv(d, *opt.csv_dir);
  }
  std::printf("wrote %s (%zu clients, %zu samples, seed %llu)\n", opt.out.c_str(), d.clients(),
              d.samples(), static_cast<unsigned long long>(spec.seed));
  return kOk;
}

// ---- export-heatmaps ----

int cmd_export_heatmaps(const HeatmapOptions& opt) {
  const fs::path run = opt.run_dir;
  if (!fs::is_directory(run)) {
    std::cerr << "f3: not a run directory: " << run << "\n";
    return kUsage;
  }
  const fs::path out = opt.out ? fs::path(*opt.out) : run / "heatmaps";
  fs::create_directories(out);

  std::size_t written = 0;
  std::vector<fs::path> seeds;
  for (const auto& e : fs::directory_iterator(run))
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) seeds.push_back(e.path());
  std::sort(seeds.begin(), seeds.end());

  for (const auto& seed_dir : seeds) {
    if (!fs::is_directory(seed_dir / "models")) continue;
    std::vector<fs::path> models;
    for (const auto& e : fs::directory_iterator(seed_dir / "models")) models.push_back(e.path());
    std::sort(models.begin(), models.end());

    for (const auto& path : models) {
      const GlobalModel gm = GlobalModel::from_json(load_json(path));
      const std::string stem = seed_dir.filename().string() + "_" + path.stem().string();

      // Expected adjacency as the model uses it (learned: theta; given/knn: normalized).
      Matrix a;
      if (is_learned(gm.config().graph))
        a = gm.posterior().probabilities();
      else if (gm.fixed_graph().rows() > 0)
        a = gm.fixed_graph();
      if (a.rows() > 0) {
        std::string csv = "row,col,value\n";
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) csv += fmt("%zu,%zu,%.17g\n", i, j, a(i, j));
        write_text(out / (stem + "_graph.csv"), csv);
        ++written;
      }

      const auto P = gm.alignment().effective();
      if (!P.empty()) {
        std::string csv = "client,row,col,value\n";
        for (std::size_t c = 0; c < P.size(); ++c)
          for (std::size_t i = 0; i < P[c].rows(); ++i)
            for (std::size_t j = 0; j < P[c].cols(); ++j)
              csv += fmt("%zu,%zu,%zu,%.17g\n", c, i, j, P[c](i, j));
        write_text(out / (stem + "_alignment.csv"), csv);
        ++written;
      }
    }
  }
  std::printf("wrote %zu heatmap file(s) to %s\n", written, out.string().c_str());
  return kOk;
}

}  // namespace f3::cli
