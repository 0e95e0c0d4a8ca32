// SPDX-License-Identifier: Apache-2.0
//
// Synthetic stand-in for a real multi-view location dataset. A smooth latent
// field built from a few low-degree spherical harmonics drives both views:
// OSM tag counts are Poisson with log-intensity affine in the field, and the
// satellite features are a fixed random linear map of the field and its local
// gradient plus noise. Probe labels: Voronoi region, density and price.
#pragma once

#include <cstdint>
#include <vector>

#include "mvse/geogrid.hpp"
#include "mvse/record.hpp"

namespace mvse {

struct WorldOptions {
  std::uint64_t seed = 0;
  std::size_t count = 2000;
  std::size_t regions = 5;
  std::size_t feature_dim = 32;
  double lon_min = -10.0;
  double lon_max = 40.0;
  double lat_min = 35.0;
  double lat_max = 70.0;
  /// Spacing of the OSM hexagon centres, degrees.
  double hex_spacing = 0.25;
};

/// Latent field of a world, standardised to mean 0 and variance 1 over the
/// window on a regular grid.
class LatentField {
 public:
  explicit LatentField(const WorldOptions& options);

  double operator()(double lon, double lat) const;
  /// Finite-difference gradient in field units per 10 degrees.
  std::pair<double, double> gradient(double lon, double lat) const;

 private:
  double raw(double lon, double lat) const;

  struct Mode {
    int l;
    int m;
    double amplitude;
  };
  std::vector<Mode> modes_;
  int max_degree_ = 0;
  double mean_ = 0.0;
  double scale_ = 1.0;
  WorldOptions options_;
};

/// Generates `options.count` records with aux labels "region", "density" and
/// "price". Requires count >= 10 and regions >= 2.
std::vector<LocationRecord> synthesize_world(const WorldOptions& options);

}  // namespace mvse
