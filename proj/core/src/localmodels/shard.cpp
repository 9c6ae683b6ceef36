// SPDX-License-Identifier: Apache-2.0
#include "f3/localmodels/shard.hpp"

#include <algorithm>
#include <string>

#include "f3/numcore/errors.hpp"

namespace f3 {

ClientShard::ClientShard(std::size_t total_samples, std::vector<std::size_t> index,
                         Matrix present_rows)
    : total_(total_samples), index_(std::move(index)), rows_(std::move(present_rows)) {
  if (rows_.rows() != index_.size()) {
    throw ShapeError("ClientShard: " + std::to_string(index_.size()) + " sample ids for " +
                     rows_.shape_str() + " rows");
  }
  for (std::size_t r = 0; r < index_.size(); ++r) {
    if (index_[r] >= total_ || (r > 0 && index_[r] <= index_[r - 1])) {
      throw ContractError("ClientShard: sample ids must be strictly increasing and < " +
                          std::to_string(total_));
    }
  }
}

ClientShard::ClientShard(const ClientShard& other)
    : total_(other.total_), index_(other.index_), rows_(other.rows_) {}

ClientShard& ClientShard::operator=(const ClientShard& other) {
  total_ = other.total_;
  index_ = other.index_;
  rows_ = other.rows_;
  bytes_read_.store(0);
  return *this;
}

std::size_t ClientShard::position(std::size_t k) const {
  const auto it = std::lower_bound(index_.begin(), index_.end(), k);
  if (it == index_.end() || *it != k) return npos;
  return static_cast<std::size_t>(it - index_.begin());
}

bool ClientShard::present(std::size_t k) const {
  if (k >= total_) throw IndexError("sample " + std::to_string(k) + " out of range");
  return position(k) != npos;
}

std::vector<std::uint8_t> ClientShard::present_mask() const {
  std::vector<std::uint8_t> mask(total_, 0);
  for (std::size_t k : index_) mask[k] = 1;
  return mask;
}

const Matrix& ClientShard::rows() const {
  bytes_read_.fetch_add(rows_.size() * sizeof(double));
  return rows_;
}

}  // namespace f3
