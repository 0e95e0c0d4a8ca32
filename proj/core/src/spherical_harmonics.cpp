// SPDX-License-Identifier: Apache-2.0
#include "mvse/spherical_harmonics.hpp"

#include <cmath>
#include <numbers>

#include "mvse/error.hpp"

namespace mvse {

void sh_basis(double azimuth, double polar, int max_degree, std::span<double> out) {
  if (max_degree < 0) throw InvalidArgument("spherical harmonic degree must be non-negative");
  const std::size_t n = sh_basis_size(max_degree);
  if (out.size() != n) throw ShapeError("sh_basis", {out.size()}, {n});

  const double x = std::cos(polar);
  // sin(polar) is non-negative on [0, pi]; clamp the rounding at the poles.
  const double s = (polar <= 0.0 || polar >= std::numbers::pi) ? 0.0 : std::sin(polar);
  const int L = max_degree;

  // Fully normalised P_l^m, including sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!).
  std::vector<double> p(static_cast<std::size_t>((L + 1) * (L + 1)), 0.0);
  auto P = [&](int l, int m) -> double& { return p[static_cast<std::size_t>(l * (L + 1) + m)]; };

  P(0, 0) = 0.5 / std::sqrt(std::numbers::pi);
  for (int m = 1; m <= L; ++m) {
    P(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * P(m - 1, m - 1);
  }
  for (int m = 0; m < L; ++m) {
    P(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * P(m, m);
  }
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      const double ll = static_cast<double>(l), mm = static_cast<double>(m);
      const double a = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - mm * mm));
      const double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - mm * mm) / (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
      P(l, m) = a * (x * P(l - 1, m) - b * P(l - 2, m));
    }
  }

  for (int l = 0; l <= L; ++l) {
    out[sh_index(l, 0)] = P(l, 0);
    for (int m = 1; m <= l; ++m) {
      const double scaled = std::numbers::sqrt2 * P(l, m);
      out[sh_index(l, m)] = scaled * std::cos(m * azimuth);
      out[sh_index(l, -m)] = scaled * std::sin(m * azimuth);
    }
  }
}

std::vector<double> sh_basis(const Coordinate& c, int max_degree) {
  if (max_degree < 0) throw InvalidArgument("spherical harmonic degree must be non-negative");
  std::vector<double> out(sh_basis_size(max_degree));
  const auto ang = to_spherical(c);
  sh_basis(ang.azimuth, ang.polar, max_degree, out);
  return out;
}

std::vector<double> positional_encode(std::span<const double> basis, std::span<const double> weights) {
  if (basis.size() != weights.size()) throw ShapeError("positional_encode", {basis.size()}, {weights.size()});
  std::vector<double> out(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) out[i] = weights[i] * basis[i];
  return out;
}

}  // namespace mvse
