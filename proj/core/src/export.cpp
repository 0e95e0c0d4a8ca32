// SPDX-License-Identifier: Apache-2.0
#include "mvse/export.hpp"

#include <fstream>
#include <sstream>

#include "mvse/checkpoint.hpp"
#include "mvse/error.hpp"

namespace mvse {

std::vector<NamedCoordinate> read_coordinates(std::istream& in) {
  const auto table = read_csv(in);
  if (table.header != std::vector<std::string>{"id", "lon", "lat"}) {
    throw FormatError(1, "header", "expected id,lon,lat");
  }
  std::vector<NamedCoordinate> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const double lon = parse_real(row[1], i + 2, "lon");
    const double lat = parse_real(row[2], i + 2, "lat");
    try {
      out.push_back({row[0], Coordinate(lon, lat)});
    } catch (const InvalidArgument& e) {
      throw FormatError(i + 2, "lon/lat", e.what());
    }
  }
  return out;
}

std::vector<NamedCoordinate> read_coordinates(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_coordinates(in);
}

CsvTable embedding_table(const MultiViewModel& model, std::span<const NamedCoordinate> coords) {
  CsvTable t;
  t.header = {"id", "lon", "lat"};
  const std::size_t d = model.config().embed_dim;
  for (std::size_t k = 1; k <= d; ++k) t.header.push_back("e_" + std::to_string(k));
  t.rows.reserve(coords.size());
  for (const auto& c : coords) {
    const auto z = model.location_encode(c.coordinate);
    std::vector<std::string> row{c.id, format_real(c.coordinate.lon()), format_real(c.coordinate.lat())};
    for (double v : z) row.push_back(format_real(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void export_embeddings(const std::filesystem::path& path, const MultiViewModel& model,
                       std::span<const NamedCoordinate> coords) {
  std::ostringstream out;
  write_csv(out, embedding_table(model, coords));
  write_file_atomic(path, out.str());
}

}  // namespace mvse
