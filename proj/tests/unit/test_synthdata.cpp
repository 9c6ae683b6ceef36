#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "f3/federation/bundle.hpp"
#include "f3/federation/config.hpp"
#include "f3/federation/metrics.hpp"
#include "f3/federation/pipeline.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/synthdata/dataset.hpp"

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("f3_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" + name);
}

f3::SyntheticSpec small_spec() {
  f3::SyntheticSpec s;
  s.clients = 6;
  s.samples = 200;
  s.event_size = 2;
  s.latent_dim = 6;
  s.seq_len = 4;
  return s;
}

}  // namespace

TEST(Synth, MissingRateMatchesTarget) {
  f3::SyntheticSpec s;
  s.missing = 0.3;
  s.seed = 5;
  const auto d = f3::generate(s);
  std::size_t absent = 0, total = 0;
  for (const auto& row : d.shown)
    for (int v : row) absent += v < 0, ++total;
  EXPECT_NEAR(static_cast<double>(absent) / total, 0.3, 0.02);
  // Every sample stays observed by someone.
  for (std::size_t k = 0; k < d.samples(); ++k) {
    bool any = false;
    for (const auto& sh : d.shards) any |= sh.present(k);
    EXPECT_TRUE(any) << k;
  }
}

TEST(Synth, PlantedRingAndPermutations) {
  const auto d = f3::generate(small_spec());
  for (std::size_t i = 0; i < 6; ++i) {
    double deg = 0;
    for (std::size_t j = 0; j < 6; ++j) deg += d.graph(i, j);
    EXPECT_EQ(deg, 2.0);
    EXPECT_EQ(d.graph(i, (i + 1) % 6), 1.0);
    std::vector<std::size_t> p = d.permutations[i];
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> id(6);
    std::iota(id.begin(), id.end(), 0);
    EXPECT_EQ(p, id);
  }
  EXPECT_EQ(d.kinds[3], f3::EmbeddingKind::gru);
  EXPECT_EQ(d.kinds[0], f3::EmbeddingKind::fc);
}

TEST(Synth, SameSeedSameDataset) {
  EXPECT_EQ(f3::generate(small_spec()), f3::generate(small_spec()));
  auto other = small_spec();
  other.seed = 1;
  EXPECT_FALSE(f3::generate(other) == f3::generate(small_spec()));
}

TEST(Synth, RejectsInconsistentSpecs) {
  auto s = small_spec();
  s.samples = 20;
  EXPECT_THROW(s.validate(), f3::ValidationError);
  s = small_spec();
  s.missing = 1.5;
  EXPECT_THROW(s.validate(), f3::ValidationError);
}

TEST(Synth, ExportImportRoundTrip) {
  const auto d = f3::generate(small_spec());
  const fs::path p = temp_file("round.f3ds");
  f3::export_dataset(d, p);
  EXPECT_EQ(f3::import_dataset(p), d);
  fs::remove(p);
}

TEST(Synth, TruncatedFileReportsOffset) {
  const auto d = f3::generate(small_spec());
  const fs::path p = temp_file("trunc.f3ds");
  f3::export_dataset(d, p);
  fs::resize_file(p, fs::file_size(p) / 2);
  try {
    f3::import_dataset(p);
    FAIL();
  } catch (const f3::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
  fs::remove(p);
}

TEST(Synth, WrongVersionIsRejected) {
  const auto d = f3::generate(small_spec());
  const fs::path p = temp_file("ver.f3ds");
  f3::export_dataset(d, p);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t v = f3::kDatasetVersion + 1;
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  EXPECT_THROW(f3::import_dataset(p), f3::FormatError);
  fs::remove(p);
}

TEST(Synth, CleanDataIsLocallySeparable) {
  f3::ExperimentConfig cfg;
  cfg.dataset = small_spec();
  cfg.dataset.conflict = 0.0;
  cfg.dataset.missing = 0.0;
  cfg.latent_dim = 6;
  cfg.variants = {{f3::VariantId::D_best_model}};
  cfg.pretrain_epochs = 200;
  const auto r = f3::run_pipeline(cfg, 0);
  EXPECT_GE(r.reports[0].f1, 0.9);
}

namespace {

// Lookup-table classifier over what the clients showed. With the graph it also
// sees how the non-normal nodes split into connected components; without it,
// only how many there are.
double lookup_f1(const f3::Dataset& d, bool use_graph) {
  const std::size_t n = d.clients(), m = d.samples(), c = d.spec.classes;
  auto feature = [&](std::size_t k) {
    std::vector<int> votes(c, 0);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      const int v = d.shown[i][k];
      if (v > 0) ++votes[static_cast<std::size_t>(v)], active.push_back(i);
    }
    const auto top = std::max_element(votes.begin(), votes.end()) - votes.begin();
    std::size_t extra = active.size();
    if (use_graph) {  // components among active nodes, by union-find
      std::vector<std::size_t> root(n);
      std::iota(root.begin(), root.end(), 0);
      auto find = [&](std::size_t x) {
        while (root[x] != x) x = root[x] = root[root[x]];
        return x;
      };
      for (std::size_t a : active)
        for (std::size_t b : active)
          if (d.graph(a, b) > 0) root[find(a)] = find(b);
      std::size_t comps = 0;
      for (std::size_t a : active) comps += find(a) == a;
      extra = extra * 100 + comps;
    }
    return std::to_string(top) + ":" + std::to_string(extra);
  };
  std::map<std::string, std::vector<int>> table;
  for (std::size_t k = 0; k < m / 2; ++k) {
    auto& counts = table[feature(k)];
    counts.resize(c, 0);
    ++counts[static_cast<std::size_t>(d.labels[k])];
  }
  std::vector<int> truth, pred;
  for (std::size_t k = m / 2; k < m; ++k) {
    const auto it = table.find(feature(k));
    int guess = 0;
    if (it != table.end())
      guess = static_cast<int>(std::max_element(it->second.begin(), it->second.end()) - it->second.begin());
    truth.push_back(d.labels[k]);
    pred.push_back(guess);
  }
  return f3::macro_f1(truth, pred, c);
}

}  // namespace

TEST(Synth, PlantedGraphIsInformative) {
  std::vector<double> gain;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    f3::SyntheticSpec s;
    s.seed = seed;
    const auto d = f3::generate(s);
    gain.push_back(lookup_f1(d, true) - lookup_f1(d, false));
  }
  std::sort(gain.begin(), gain.end());
  EXPECT_GE(gain[2], 0.05);
}

TEST(Synth, ConflictShowsUpAsLocalDisagreement) {
  f3::ExperimentConfig cfg;
  cfg.dataset.samples = 300;
  cfg.variants = {{f3::VariantId::B_majority}};
  const auto r = f3::run_pipeline(cfg, 0);
  std::vector<double> h = r.entropy;
  std::nth_element(h.begin(), h.begin() + h.size() / 2, h.end());
  EXPECT_GT(h[h.size() / 2], 0.2);
}
