// SPDX-License-Identifier: Apache-2.0
// f3: run experiments, verification suites, sampler benchmarks, data export.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace f3::cli;

  CLI::App app{"Federated feature fusion experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "f3 0.1.0");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate the configured variants");
  run_cmd->add_option("config,--config", run.config, "YAML or JSON experiment config")->required();
  run_cmd->add_option("--seed", run.seed, "Run this seed instead of the config's list");
  run_cmd->add_option("--out", run.out, "Output directory (overrides out_dir)");
  run_cmd->add_option("--threads", run.threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--dry-run", run.dry_run, "Validate the config and exit");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run a numerical property suite");
  verify_cmd->add_option("suite", verify.suite, "cdf | bias | sinkhorn | permutation | gradcheck | all")
      ->required()
      ->check(CLI::IsMember({"cdf", "bias", "sinkhorn", "permutation", "gradcheck", "all"}));
  verify_cmd->add_option("--out", verify.out, "Directory for the JSON report and CSV evidence");
  verify_cmd->add_option("--samples", verify.samples, "Monte-Carlo samples per point (cdf, bias)");
  verify_cmd->add_option("--seed", verify.seed, "Suite seed");
  verify_cmd->add_option("--threads", verify.threads, "Worker threads")->check(CLI::PositiveNumber);

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time ICDF against Gumbel edge sampling");
  bench_cmd->add_option("--sizes", bench.sizes, "Edge samples per measurement")->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "Repetitions (minimum time is kept)")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bench.out, "Write the CSV here instead of stdout");
  bench_cmd->add_option("--seed", bench.seed);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
  gen_cmd->add_option("--config", gen.config, "Experiment config whose dataset section is used");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed (overrides the config)");
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
  gen_cmd->add_option("--csv", gen.csv_dir, "Also write a CSV debug dump to this directory");

  HeatmapOptions heat;
  auto* heat_cmd = app.add_subcommand("export-heatmaps",
                                      "Write edge-probability and alignment CSVs from a run");
  heat_cmd->add_option("run_dir", heat.run_dir, "Directory written by 'f3 run'")->required();
  heat_cmd->add_option("--out", heat.out, "Output directory (default: <run_dir>/heatmaps)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*verify_cmd) return cmd_verify(verify);
    if (*bench_cmd) return cmd_bench(bench);
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*heat_cmd) return cmd_export_heatmaps(heat);
  } catch (const std::exception& e) {
    std::cerr << "f3: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
