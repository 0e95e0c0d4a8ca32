// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mvse {

/// Row-major N x Q design matrix with column names and named column groups.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::vector<std::string> columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  const std::vector<std::string>& columns() const noexcept { return columns_; }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  std::span<const double> row(std::size_t i) const { return std::span(data_).subspan(i * cols(), cols()); }
  std::span<double> row(std::size_t i) { return std::span(data_).subspan(i * cols(), cols()); }

  /// Declares a group; columns must exist and not already belong to a group.
  void add_group(const std::string& name, std::vector<std::size_t> columns);
  bool has_group(const std::string& name) const { return groups_.count(name) > 0; }
  /// Throws InvalidArgument for an unknown group.
  const std::vector<std::size_t>& group(const std::string& name) const;
  const std::map<std::string, std::vector<std::size_t>>& groups() const noexcept { return groups_; }

  /// Rows selected by index, same columns and groups.
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  /// Throws NumericError if any entry is NaN or infinite.
  void check_finite() const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::string> columns_;
  std::vector<double> data_;
  std::map<std::string, std::vector<std::size_t>> groups_;
};

/// Anything that maps feature rows to one prediction per row.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::vector<double> predict(const FeatureMatrix& x) const = 0;
};

enum class ProbeKind { Ridge, Logistic };

/// Linear probe. Ridge: one coefficient row, prediction x.b + c. Logistic:
/// one row per class; predict() returns the most probable class label.
struct ProbeModel final : Predictor {
  ProbeKind kind = ProbeKind::Ridge;
  double lambda = 0.0;
  std::vector<std::vector<double>> coefficients;  // [outputs][Q]
  std::vector<double> intercept;                  // [outputs]
  std::vector<int> classes;                       // logistic only

  std::size_t input_dim() const override;
  std::vector<double> predict(const FeatureMatrix& x) const override;
  /// Class probabilities, [N][classes]. Logistic only.
  std::vector<std::vector<double>> predict_proba(const FeatureMatrix& x) const;
};

/// Closed-form ridge regression with an unpenalised intercept. With
/// lambda = 0 a singular system raises InvalidArgument.
ProbeModel ridge_fit(const FeatureMatrix& x, std::span<const double> y, double lambda);

struct LogisticOptions {
  std::size_t iterations = 2000;
  double learning_rate = 0.5;
};

/// Multinomial logistic regression by full-batch gradient descent on
/// internally standardised features. Needs at least two classes.
ProbeModel logistic_fit(const FeatureMatrix& x, std::span<const int> labels, double lambda,
                        const LogisticOptions& options = {});

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual);
double accuracy(std::span<const double> predicted, std::span<const int> actual);

}  // namespace mvse
