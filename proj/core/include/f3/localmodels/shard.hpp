// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "f3/numcore/matrix.hpp"

namespace f3 {

/// One client's slice of the data: rows only for the samples it observed.
/// Every read of the feature rows goes through rows(), which tallies bytes
/// so tests can audit who touched which shard.
class ClientShard {
 public:
  ClientShard() = default;
  /// `present` has one row per sample id in `index` (strictly increasing, < total).
  ClientShard(std::size_t total_samples, std::vector<std::size_t> index, Matrix present_rows);
  ClientShard(const ClientShard& other);
  ClientShard& operator=(const ClientShard& other);

  std::size_t total_samples() const noexcept { return total_; }
  std::size_t present_count() const noexcept { return index_.size(); }
  std::size_t features() const noexcept { return rows_.cols(); }

  /// Sample ids that are present, ascending.
  const std::vector<std::size_t>& index() const noexcept { return index_; }
  bool present(std::size_t k) const;
  std::vector<std::uint8_t> present_mask() const;
  /// Position of sample k within rows(), or npos when absent.
  std::size_t position(std::size_t k) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  const Matrix& rows() const;

  std::uint64_t bytes_read() const noexcept { return bytes_read_.load(); }
  void reset_audit() noexcept { bytes_read_.store(0); }

  bool operator==(const ClientShard& other) const {
    return total_ == other.total_ && index_ == other.index_ && rows_ == other.rows_;
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::size_t> index_;
  Matrix rows_;
  mutable std::atomic<std::uint64_t> bytes_read_{0};
};

}  // namespace f3
