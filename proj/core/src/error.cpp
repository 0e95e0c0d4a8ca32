// SPDX-License-Identifier: Apache-2.0
#include "mvse/error.hpp"

namespace mvse {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ShapeError::ShapeError(const std::string& op, const std::vector<std::size_t>& lhs,
                       const std::vector<std::size_t>& rhs)
    : Error(op + ": incompatible shapes " + shape_to_string(lhs) + " and " +
            shape_to_string(rhs)),
      op_(op) {}

NumericError::NumericError(const std::string& op)
    : Error(op + ": non-finite value produced"), op_(op) {}

NumericError::NumericError(const std::string& op, const std::string& detail)
    : Error(op + ": " + detail), op_(op) {}

FormatError::FormatError(std::size_t line, const std::string& field, const std::string& what)
    : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
      line_(line),
      field_(field) {}

TrainingError::TrainingError(std::size_t epoch, std::size_t batch, const std::string& what)
    : Error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
      epoch_(epoch),
      batch_(batch) {}

}  // namespace mvse
