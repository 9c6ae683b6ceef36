// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace f3::cli {

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2 };

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  bool dry_run = false;
};

struct VerifyOptions {
  std::string suite;  // cdf, bias, sinkhorn, permutation, gradcheck, all
  std::optional<std::string> out;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct BenchOptions {
  std::vector<std::uint64_t> sizes{1000000};
  int repeats = 3;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
};

struct GenDataOptions {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> csv_dir;
};

struct HeatmapOptions {
  std::string run_dir;
  std::optional<std::string> out;
};

int cmd_run(const RunOptions& opt);
int cmd_verify(const VerifyOptions& opt);
int cmd_bench(const BenchOptions& opt);
int cmd_gen_data(const GenDataOptions& opt);
int cmd_export_heatmaps(const HeatmapOptions& opt);

}  // namespace f3::cli
