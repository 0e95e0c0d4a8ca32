// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mvse/geogrid.hpp"

namespace mvse {

/// One location with its spatial views. Empty view vectors mean "absent".
struct LocationRecord {
  std::string id;
  Coordinate coordinate{0.0, 0.0};
  /// 37 x 6 tag counts, cell-major in canonical ring order.
  std::vector<double> osm_counts;
  /// Precomputed satellite feature vector.
  std::vector<double> gs_features;
  /// Optional probe labels, e.g. "region", "density", "price".
  std::map<std::string, double> aux;

  bool has_osm() const noexcept { return !osm_counts.empty(); }
  bool has_gs() const noexcept { return !gs_features.empty(); }

  friend bool operator==(const LocationRecord&, const LocationRecord&) = default;
};

}  // namespace mvse
