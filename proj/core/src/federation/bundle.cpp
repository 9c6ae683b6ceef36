// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<Split> stratified_split(std::span<const int> labels, std::size_t classes,
                                    std::uint64_t seed, double train, double val) {
  if (!(train > 0.0 && val >= 0.0 && train + val < 1.0)) {
    throw ValidationError("split fractions must satisfy train > 0, val >= 0, train + val < 1");
  }
  std::vector<Split> out(labels.size(), Split::test);
  const CounterRng rng(hash_keys(seed, 0x5917));
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == static_cast<int>(c)) ids.push_back(k);
    // Seeded Fisher-Yates keyed by class.
    for (std::size_t i = ids.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform(c, i) * static_cast<double>(i));
      std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
    }
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::lround(train * n));
    const auto n_val = static_cast<std::size_t>(std::lround(val * n));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out[ids[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    }
  }
  return out;
}

std::vector<std::size_t> split_indices(std::span<const Split> split, Split s) {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < split.size(); ++k)
    if (split[k] == s) ids.push_back(k);
  return ids;
}

std::uint64_t TransferLog::total_out() const noexcept {
  return std::accumulate(out_.begin(), out_.end(), std::uint64_t{0});
}

std::uint64_t TransferLog::total_in() const noexcept {
  return std::accumulate(in_.begin(), in_.end(), std::uint64_t{0});
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> ids) {
  Matrix out(ids.size(), m.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= m.rows()) throw IndexError("select_rows: row " + std::to_string(ids[r]) + " out of range");
    const auto src = m.row_span(ids[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

std::vector<Matrix> RepresentationBundle::rows(std::span<const std::size_t> ids) const {
  std::vector<Matrix> out;
  out.reserve(latents.size());
  for (const Matrix& l : latents) out.push_back(select_rows(l, ids));
  return out;
}

void RepresentationBundle::require_coverage() const {
  for (std::size_t k = 0; k < samples(); ++k) {
    bool any = false;
    for (const auto& p : present) any = any || p[k];
    if (!any) throw DegenerateSampleError("sample " + std::to_string(k) + " was observed by no client");
  }
}

RepresentationBundle collect_bundle(std::span<const LocalClient> clients,
                                    std::span<const int> labels, std::span<const Split> split,
                                    TransferLog& log) {
  if (clients.empty()) throw ContractError("collect_bundle: no clients");
  if (labels.size() != split.size()) throw ShapeError("collect_bundle: labels and split differ in length");
  RepresentationBundle b;
  b.labels.assign(labels.begin(), labels.end());
  b.split.assign(split.begin(), split.end());
  const std::size_t d = clients[0].latent_dim();
  for (const LocalClient& c : clients) {
    if (c.latent_dim() != d) throw ShapeError("collect_bundle: clients disagree on the latent dimension");
    if (c.shard.total_samples() != labels.size()) throw ShapeError("collect_bundle: shard size differs from label count");
    const Matrix compact = client_latents(c);
    Matrix full(labels.size(), d);
    const auto& index = c.shard.index();
    for (std::size_t r = 0; r < index.size(); ++r) {
      const auto src = compact.row_span(r);
      std::copy(src.begin(), src.end(), full.row_span(index[r]).begin());
    }
    b.latents.push_back(std::move(full));
    b.present.push_back(c.shard.present_mask());
    log.outbound(c.id);
  }
  return b;
}

LocalPredictions collect_predictions(std::span<const LocalClient> clients, TransferLog& log) {
  LocalPredictions lp;
  if (clients.empty()) return lp;
  lp.classes = clients[0].classes();
  for (const LocalClient& c : clients) {
    const std::size_t m = c.shard.total_samples();
    const Matrix compact = client_probs(c);
    const auto arg = argmax_rows(compact);
    std::vector<int> pred(m, -1);
    Matrix probs(m, lp.classes);
    const auto& index = c.shard.index();
    for (std::size_t r = 0; r < index.size(); ++r) {
      pred[index[r]] = arg[r];
      const auto src = compact.row_span(r);
      std::copy(src.begin(), src.end(), probs.row_span(index[r]).begin());
    }
    lp.predicted.push_back(std::move(pred));
    lp.probs.push_back(std::move(probs));
    log.outbound(c.id);
  }
  return lp;
}

}  // namespace f3
