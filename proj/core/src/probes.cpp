// SPDX-License-Identifier: Apache-2.0
#include "mvse/probes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "mvse/error.hpp"

namespace mvse {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::vector<std::string> columns)
    : rows_(rows), columns_(std::move(columns)), data_(rows * columns_.size(), 0.0) {}

void FeatureMatrix::add_group(const std::string& name, std::vector<std::size_t> columns) {
  if (groups_.count(name)) throw InvalidArgument("group '" + name + "' already defined");
  if (columns.empty()) throw InvalidArgument("group '" + name + "' is empty");
  for (std::size_t c : columns) {
    if (c >= cols()) throw InvalidArgument("group '" + name + "' names column " + std::to_string(c) + " out of range");
    for (const auto& [other, cs] : groups_) {
      if (std::find(cs.begin(), cs.end(), c) != cs.end()) {
        throw InvalidArgument("column '" + columns_[c] + "' already belongs to group '" + other + "'");
      }
    }
  }
  std::set<std::size_t> unique(columns.begin(), columns.end());
  if (unique.size() != columns.size()) throw InvalidArgument("group '" + name + "' repeats a column");
  groups_.emplace(name, std::move(columns));
}

const std::vector<std::size_t>& FeatureMatrix::group(const std::string& name) const {
  const auto it = groups_.find(name);
  if (it == groups_.end()) throw InvalidArgument("unknown feature group '" + name + "'");
  return it->second;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), columns_);
  out.groups_ = groups_;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void FeatureMatrix::check_finite() const {
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      throw NumericError("feature_matrix", "non-finite value in column '" + columns_[k % cols()] + "', row " +
                                               std::to_string(k / cols()));
    }
  }
}

std::size_t ProbeModel::input_dim() const { return coefficients.empty() ? 0 : coefficients.front().size(); }

namespace {

void check_input(const ProbeModel& m, const FeatureMatrix& x) {
  if (x.cols() != m.input_dim()) {
    throw ShapeError("probe_predict", {x.rows(), x.cols()}, {m.coefficients.size(), m.input_dim()});
  }
}

std::vector<double> linear_scores(const ProbeModel& m, const FeatureMatrix& x, std::size_t i) {
  std::vector<double> s(m.coefficients.size());
  const auto row = x.row(i);
  for (std::size_t k = 0; k < s.size(); ++k) {
    double v = m.intercept[k];
    for (std::size_t j = 0; j < row.size(); ++j) v += m.coefficients[k][j] * row[j];
    s[k] = v;
  }
  return s;
}

void softmax_inplace(std::vector<double>& s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (auto& v : s) z += (v = std::exp(v - mx));
  for (auto& v : s) v /= z;
}

}  // namespace

std::vector<double> ProbeModel::predict(const FeatureMatrix& x) const {
  check_input(*this, x);
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto s = linear_scores(*this, x, i);
    if (kind == ProbeKind::Ridge) {
      out[i] = s[0];
    } else {
      const auto best = std::max_element(s.begin(), s.end()) - s.begin();
      out[i] = classes[static_cast<std::size_t>(best)];
    }
  }
  return out;
}

std::vector<std::vector<double>> ProbeModel::predict_proba(const FeatureMatrix& x) const {
  if (kind != ProbeKind::Logistic) throw InvalidArgument("predict_proba needs a logistic probe");
  check_input(*this, x);
  std::vector<std::vector<double>> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = linear_scores(*this, x, i);
    softmax_inplace(out[i]);
  }
  return out;
}

ProbeModel ridge_fit(const FeatureMatrix& x, std::span<const double> y, double lambda) {
  const std::size_t n = x.rows();
  const std::size_t q = x.cols();
  if (n == 0) throw InvalidArgument("ridge_fit needs at least one row");
  if (y.size() != n) throw ShapeError("ridge_fit", {n, q}, {y.size()});
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("ridge lambda must be finite and >= 0");
  x.check_finite();

  // Centring removes the intercept from the penalised system.
  Eigen::VectorXd xmean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
  double ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < q; ++j) xmean[static_cast<Eigen::Index>(j)] += x.at(i, j);
    ymean += y[i];
  }
  xmean /= static_cast<double>(n);
  ymean /= static_cast<double>(n);

  Eigen::MatrixXd xc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      xc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x.at(i, j) - xmean[static_cast<Eigen::Index>(j)];
    }
    yc[static_cast<Eigen::Index>(i)] = y[i] - ymean;
  }

  ProbeModel m;
  m.kind = ProbeKind::Ridge;
  m.lambda = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
  if (q > 0) {
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = xc.transpose() * yc;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
      throw InvalidArgument("ridge system is singular; use lambda > 0");
    }
    beta = lu.solve(rhs);
  }
  m.coefficients.assign(1, std::vector<double>(beta.data(), beta.data() + beta.size()));
  m.intercept = {ymean - xmean.dot(beta)};
  return m;
}

ProbeModel logistic_fit(const FeatureMatrix& x, std::span<const int> labels, double lambda,
                        const LogisticOptions& options) {
  const std::size_t n = x.rows();
  const std::size_t q = x.cols();
  if (labels.size() != n) throw ShapeError("logistic_fit", {n, q}, {labels.size()});
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("logistic lambda must be finite and >= 0");
  x.check_finite();
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw InvalidArgument("logistic_fit needs at least two classes");

  ProbeModel m;
  m.kind = ProbeKind::Logistic;
  m.lambda = lambda;
  m.classes.assign(distinct.begin(), distinct.end());
  const std::size_t k = m.classes.size();

  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = static_cast<std::size_t>(std::lower_bound(m.classes.begin(), m.classes.end(), labels[i]) - m.classes.begin());
  }

  // Standardise, fit, then fold the scaling back into the coefficients.
  std::vector<double> mu(q, 0.0), sd(q, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) mu[j] += x.at(i, j);
  for (auto& v : mu) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) sd[j] += (x.at(i, j) - mu[j]) * (x.at(i, j) - mu[j]);
  for (auto& v : sd) {
    const double root = std::sqrt(v / static_cast<double>(n));
    v = root > 1e-12 ? root : 1.0;
  }

  FeatureMatrix z(n, x.columns());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) z.at(i, j) = (x.at(i, j) - mu[j]) / sd[j];

  ProbeModel s = m;
  s.coefficients.assign(k, std::vector<double>(q, 0.0));
  s.intercept.assign(k, 0.0);
  std::vector<std::vector<double>> gw(k, std::vector<double>(q));
  std::vector<double> gb(k);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = linear_scores(s, z, i);
      softmax_inplace(p);
      p[target[i]] -= 1.0;
      const auto row = z.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        gb[c] += p[c] * inv_n;
        for (std::size_t j = 0; j < q; ++j) gw[c][j] += p[c] * row[j] * inv_n;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      s.intercept[c] -= options.learning_rate * gb[c];
      for (std::size_t j = 0; j < q; ++j) {
        s.coefficients[c][j] -= options.learning_rate * (gw[c][j] + lambda * s.coefficients[c][j]);
      }
    }
  }

  m.coefficients.assign(k, std::vector<double>(q));
  m.intercept.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double b = s.intercept[c];
    for (std::size_t j = 0; j < q; ++j) {
      m.coefficients[c][j] = s.coefficients[c][j] / sd[j];
      b -= m.coefficients[c][j] * mu[j];
    }
    m.intercept[c] = b;
  }
  return m;
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || predicted.empty()) {
    throw ShapeError("mean_squared_error", {predicted.size()}, {actual.size()});
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
  return s / static_cast<double>(predicted.size());
}

double accuracy(std::span<const double> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size() || predicted.empty()) {
    throw ShapeError("accuracy", {predicted.size()}, {actual.size()});
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace mvse
