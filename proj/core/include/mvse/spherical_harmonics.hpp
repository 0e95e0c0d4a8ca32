// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvse/geogrid.hpp"

namespace mvse {

/// Number of real spherical harmonics up to and including degree L.
constexpr std::size_t sh_basis_size(int max_degree) noexcept {
  const auto n = static_cast<std::size_t>(max_degree + 1);
  return n * n;
}

/// Flat index of (l, m), m in [-l, l], l-major.
constexpr std::size_t sh_index(int l, int m) noexcept {
  return static_cast<std::size_t>(l * l + l + m);
}

/// Real orthonormal spherical harmonics Y_l^m for l = 0..L, evaluated at the
/// azimuth/polar angles of `c`. No Condon-Shortley phase: for m > 0 the
/// harmonic is sqrt(2) N P_l^m cos(m az), for m < 0 sqrt(2) N P_l^|m| sin(|m| az).
/// Associated Legendre values come from the fully normalised three-term
/// recurrence, which stays stable for high degrees.
std::vector<double> sh_basis(const Coordinate& c, int max_degree);

/// Same, from spherical angles; writes (L+1)^2 values into `out`.
void sh_basis(double azimuth, double polar, int max_degree, std::span<double> out);

/// Elementwise w * Y; throws ShapeError on length mismatch.
std::vector<double> positional_encode(std::span<const double> basis, std::span<const double> weights);

}  // namespace mvse
