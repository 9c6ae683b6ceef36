// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace f3 {

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An input lies outside the mathematical domain of an operation
/// (log of a nonpositive entry, a nonpositive Sinkhorn kernel, ...).
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, std::size_t index)
      : std::domain_error(what + " (at flat index " + std::to_string(index) + ")"),
        index_(index) {}
  explicit DomainError(const std::string& what) : std::domain_error(what) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_ = static_cast<std::size_t>(-1);
};

/// A numeric computation over/underflowed to a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An index (class label, client id, sample id) is out of range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A sample cannot be processed because no client observed it.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested (client, sample) pair is missing from the shard.
class MissingDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk artifact is malformed, truncated or of the wrong version.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_ = static_cast<std::size_t>(-1);
};

/// An experiment or dataset configuration is internally inconsistent.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace f3
