// SPDX-License-Identifier: Apache-2.0
#include "mvse/interpret.hpp"

#include <cmath>
#include <sstream>

#include "mvse/checkpoint.hpp"
#include "mvse/error.hpp"
#include "mvse/random.hpp"

namespace mvse {

FeatureMatrix permute_columns(const FeatureMatrix& x, std::span<const std::size_t> columns,
                              std::span<const std::size_t> perm) {
  if (perm.size() != x.rows()) throw ShapeError("permute_columns", {x.rows()}, {perm.size()});
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (perm[i] >= x.rows()) throw InvalidArgument("permutation index out of range");
    for (std::size_t c : columns) out.at(i, c) = x.at(perm[i], c);
  }
  return out;
}

double permutation_importance(const Predictor& model, const FeatureMatrix& x, const std::string& group,
                              std::span<const std::vector<std::size_t>> permutations) {
  const auto& cols = x.group(group);
  if (permutations.empty()) throw InvalidArgument("permutation_importance needs at least one repeat");
  if (x.rows() == 0) throw InvalidArgument("permutation_importance needs at least one row");
  const auto base = model.predict(x);
  double total = 0.0;
  for (const auto& perm : permutations) {
    const auto shuffled = model.predict(permute_columns(x, cols, perm));
    double s = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) s += std::abs(base[i] - shuffled[i]);
    total += s / static_cast<double>(base.size());
  }
  return total / static_cast<double>(permutations.size());
}

double permutation_importance(const Predictor& model, const FeatureMatrix& x, const std::string& group,
                              std::uint64_t seed, std::size_t repeats) {
  x.group(group);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> perms;
  perms.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) perms.push_back(rng.permutation(x.rows()));
  return permutation_importance(model, x, group, perms);
}

std::vector<PdPoint> partial_dependence(const Predictor& model, const FeatureMatrix& x,
                                        const std::string& location_group, std::span<const Coordinate> grid,
                                        const Embedder& embedder, std::span<const std::size_t> rows) {
  const auto& cols = x.group(location_group);
  if (!embedder && cols.size() != 2) {
    throw InvalidArgument("location group '" + location_group + "' has " + std::to_string(cols.size()) +
                          " columns; an embedder is required");
  }
  std::vector<std::size_t> selected(rows.begin(), rows.end());
  if (selected.empty()) {
    selected.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) selected[i] = i;
  }
  if (selected.empty()) throw InvalidArgument("partial_dependence needs at least one row");
  const FeatureMatrix base = x.select_rows(selected);
  const std::size_t n = base.rows();

  // One stacked matrix holding every (grid point, row) pair.
  FeatureMatrix stacked(grid.size() * n, x.columns());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> loc;
    if (embedder) {
      loc = embedder(grid[g]);
      if (loc.size() != cols.size()) {
        throw ShapeError("partial_dependence", {cols.size()}, {loc.size()});
      }
    } else {
      loc = {grid[g].lon(), grid[g].lat()};
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = stacked.row(g * n + i);
      const auto src = base.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
      for (std::size_t k = 0; k < cols.size(); ++k) dst[cols[k]] = loc[k];
    }
  }
  const auto pred = grid.empty() ? std::vector<double>{} : model.predict(stacked);

  std::vector<PdPoint> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pred[g * n + i];
    out[g] = {grid[g].lon(), grid[g].lat(), s / static_cast<double>(n)};
  }
  return out;
}

NumericTable pd_table(std::span<const PdPoint> points) {
  NumericTable t;
  t.columns = {"lon", "lat", "pd"};
  for (const auto& p : points) t.rows.push_back({p.lon, p.lat, p.value});
  return t;
}

bool Polygon::contains(const Coordinate& c) const {
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = vertices[i].lon(), yi = vertices[i].lat();
    const double xj = vertices[j].lon(), yj = vertices[j].lat();
    if ((yi > c.lat()) != (yj > c.lat()) && c.lon() < (xj - xi) * (c.lat() - yi) / (yj - yi) + xi) inside = !inside;
  }
  return inside;
}

namespace {

HoldoutSplit finish(HoldoutSplit s) {
  s.empty_side = s.inside.empty() || s.outside.empty();
  return s;
}

}  // namespace

HoldoutSplit region_holdout_split(std::span<const LocationRecord> records, const Polygon& region) {
  if (region.vertices.size() < 3) throw InvalidArgument("region polygon needs at least 3 vertices");
  HoldoutSplit s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (region.contains(records[i].coordinate) ? s.inside : s.outside).push_back(i);
  }
  return finish(std::move(s));
}

HoldoutSplit region_holdout_split(std::size_t count, const std::set<std::size_t>& members) {
  if (!members.empty() && *members.rbegin() >= count) {
    throw InvalidArgument("region index " + std::to_string(*members.rbegin()) + " out of range");
  }
  HoldoutSplit s;
  for (std::size_t i = 0; i < count; ++i) (members.count(i) ? s.inside : s.outside).push_back(i);
  return finish(std::move(s));
}

HoldoutSplit region_holdout_split(std::span<const LocationRecord> records, const std::string& label, double value) {
  HoldoutSplit s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = records[i].aux.find(label);
    if (it == records[i].aux.end()) throw InvalidArgument("record '" + records[i].id + "' has no label '" + label + "'");
    (it->second == value ? s.inside : s.outside).push_back(i);
  }
  return finish(std::move(s));
}

void emit_plot_data(const NumericTable& table, const std::filesystem::path& path) {
  if (table.rows.empty()) throw InvalidArgument("plot table is empty");
  CsvTable csv;
  csv.header = table.columns;
  for (const auto& row : table.rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(format_real(v));
    csv.rows.push_back(std::move(cells));
  }
  std::ostringstream out;
  write_csv(out, csv);
  write_file_atomic(path, out.str());
}

NumericTable read_plot_data(const std::filesystem::path& path) { return to_numeric(read_csv(path)); }

}  // namespace mvse
