// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvse/csv.hpp"
#include "mvse/encoders.hpp"

namespace mvse {

struct NamedCoordinate {
  std::string id;
  Coordinate coordinate;
};

/// Reads an `id,lon,lat` table.
std::vector<NamedCoordinate> read_coordinates(const std::filesystem::path& path);
std::vector<NamedCoordinate> read_coordinates(std::istream& in);

/// Table with header id,lon,lat,e_1..e_d and one row per coordinate.
CsvTable embedding_table(const MultiViewModel& model, std::span<const NamedCoordinate> coords);
void export_embeddings(const std::filesystem::path& path, const MultiViewModel& model,
                       std::span<const NamedCoordinate> coords);

}  // namespace mvse
