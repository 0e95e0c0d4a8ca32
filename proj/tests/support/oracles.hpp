// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations shared by the unit and acceptance
// tests. Nothing here calls the code paths it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvse/autodiff.hpp"
#include "mvse/geogrid.hpp"
#include "mvse/random.hpp"

namespace mvse::testing {

/// Fills a tensor with N(0, scale^2) draws.
inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

/// sum(y * R) for a fixed random R, so every output entry gets a distinct
/// upstream gradient.
inline ad::Var random_projection(ad::Var y, std::uint64_t seed) {
  Rng rng(seed);
  auto r = random_tensor(rng, y.shape());
  return ad::sum(ad::mul(y, y.tape().constant(std::move(r))));
}

struct GradCheck {
  double max_rel_error = 0.0;  // worst parameter, norm-wise
  std::string worst;
};

/// Compares the tape gradient of `loss` with central differences for every
/// entry of every parameter in `params`. The error per parameter is
/// ||analytic - numeric|| / max(||analytic||, ||numeric||, tiny).
inline GradCheck gradient_check(ad::ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss,
                                double h = 1e-6) {
  params.zero_grad();
  {
    ad::Tape tape;
    tape.bind(params);
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    ad::Tape tape({.record_gradients = false, .trap_non_finite = true});
    return loss(tape).value().item();
  };
  GradCheck out;
  for (auto& p : params) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    auto values = p->value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = eval();
      values[i] = orig - h;
      const double down = eval();
      values[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad[i];
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    const double rel = std::sqrt(diff) / denom;
    if (rel >= out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = p->name;
    }
  }
  return out;
}

/// Convolution computed on the hexagonal grid itself: the output at cell i
/// sums, over every grid cell j within `filter_rings` hex steps of i, the
/// filter tap addressed by the axial offset j - i. Filter layout [Co,K,K,Ci]
/// in square coordinates, where an axial offset (dq, dr) sits at
/// (row, col) = (filter_rings - dr, filter_rings + dq).
inline std::vector<double> hex_conv_bruteforce(int grid_rings, const std::vector<double>& input, std::size_t ci,
                                               const std::vector<double>& weight, std::size_t co,
                                               const std::vector<double>& bias, int filter_rings) {
  const auto& cells = hex_layout(grid_rings);
  const std::size_t K = static_cast<std::size_t>(2 * filter_rings + 1);
  std::vector<double> out(cells.size() * co, 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t o = 0; o < co; ++o) {
      double acc = bias[o];
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (hex_distance(cells[i], cells[j]) > filter_rings) continue;
        const int dq = cells[j].q - cells[i].q;
        const int dr = cells[j].r - cells[i].r;
        const auto row = static_cast<std::size_t>(filter_rings - dr);
        const auto col = static_cast<std::size_t>(filter_rings + dq);
        for (std::size_t c = 0; c < ci; ++c) {
          acc += weight[((o * K + row) * K + col) * ci + c] * input[j * ci + c];
        }
      }
      out[i * co + o] = acc;
    }
  }
  return out;
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = z;
    w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> naive_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) throw std::runtime_error("singular");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Ridge regression from the normal equations with an explicit intercept
/// column that is left unpenalised. Returns {intercept, b_1..b_Q}.
inline std::vector<double> ridge_oracle(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                        double lambda) {
  const std::size_t q = x.front().size() + 1;
  std::vector<std::vector<double>> a(q, std::vector<double>(q, 0.0));
  std::vector<double> b(q, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> row{1.0};
    row.insert(row.end(), x[i].begin(), x[i].end());
    for (std::size_t r = 0; r < q; ++r) {
      b[r] += row[r] * y[i];
      for (std::size_t c = 0; c < q; ++c) a[r][c] += row[r] * row[c];
    }
  }
  for (std::size_t r = 1; r < q; ++r) a[r][r] += lambda;
  return naive_solve(a, b);
}

}  // namespace mvse::testing
