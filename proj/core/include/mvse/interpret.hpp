// SPDX-License-Identifier: Apache-2.0
//
// Model-agnostic interpretation: grouped permutation importance, partial
// dependence over locations, and region holdouts for transfer experiments.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mvse/csv.hpp"
#include "mvse/geogrid.hpp"
#include "mvse/probes.hpp"
#include "mvse/record.hpp"

namespace mvse {

/// Copy of `x` whose `columns` are reordered by one shared row permutation:
/// row i of the result takes those columns from row perm[i].
FeatureMatrix permute_columns(const FeatureMatrix& x, std::span<const std::size_t> columns,
                              std::span<const std::size_t> perm);

/// mean over repeats of mean_i |f(x_i) - f(x~_i)|, where x~ permutes the
/// group's columns with a single random row permutation per repeat.
double permutation_importance(const Predictor& model, const FeatureMatrix& x, const std::string& group,
                              std::uint64_t seed, std::size_t repeats);

/// Same with caller-supplied permutations, one per repeat.
double permutation_importance(const Predictor& model, const FeatureMatrix& x, const std::string& group,
                              std::span<const std::vector<std::size_t>> permutations);

using Embedder = std::function<std::vector<double>(const Coordinate&)>;

struct PdPoint {
  double lon = 0.0;
  double lat = 0.0;
  double value = 0.0;
};

/// For every grid coordinate c, the mean prediction over the selected rows
/// with the location group replaced by c. A two-column group is filled with
/// (lon, lat) unless an embedder is given, in which case it is filled with
/// embedder(c); wider groups require an embedder. `rows` restricts the
/// average to a subset (empty means all rows).
std::vector<PdPoint> partial_dependence(const Predictor& model, const FeatureMatrix& x,
                                        const std::string& location_group, std::span<const Coordinate> grid,
                                        const Embedder& embedder = {}, std::span<const std::size_t> rows = {});

NumericTable pd_table(std::span<const PdPoint> points);

/// Simple polygon in lon/lat degrees (even-odd rule).
struct Polygon {
  std::vector<Coordinate> vertices;
  bool contains(const Coordinate& c) const;
};

struct HoldoutSplit {
  std::vector<std::size_t> inside;
  std::vector<std::size_t> outside;
  /// Set when one side is empty; the split is still returned.
  bool empty_side = false;
};

HoldoutSplit region_holdout_split(std::span<const LocationRecord> records, const Polygon& region);
HoldoutSplit region_holdout_split(std::size_t count, const std::set<std::size_t>& members);
/// Records whose aux[label] equals `value` form the held-out side.
HoldoutSplit region_holdout_split(std::span<const LocationRecord> records, const std::string& label, double value);

/// Writes a numeric table as CSV with full-precision reals.
void emit_plot_data(const NumericTable& table, const std::filesystem::path& path);
NumericTable read_plot_data(const std::filesystem::path& path);

}  // namespace mvse
