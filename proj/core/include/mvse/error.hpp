// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor shapes; the message names both shapes.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const std::vector<std::size_t>& lhs,
             const std::vector<std::size_t>& rhs);

  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// A NaN or infinity was produced by the named operation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& op);
  NumericError(const std::string& op, const std::string& detail);

  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Model configuration is inconsistent, or data does not match it.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line and the offending field.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& field, const std::string& what);

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Checkpoint is truncated, corrupted, foreign, or of an unsupported version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training aborted; the message names the failing batch.
class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch, const std::string& what);

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace mvse
