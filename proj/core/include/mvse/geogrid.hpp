// SPDX-License-Identifier: Apache-2.0
//
// Coordinates, hexagonal ring grids and their h2 placement into square
// matrices so that hexagonal neighbourhoods become corner-masked square
// convolution windows.
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace mvse {

/// Geographic coordinate in degrees. Longitude in [-180, 180], latitude in
/// [-90, 90]; both checked on construction.
class Coordinate {
 public:
  Coordinate(double lon, double lat);

  double lon() const noexcept { return lon_; }
  double lat() const noexcept { return lat_; }

  friend bool operator==(const Coordinate&, const Coordinate&) = default;

 private:
  double lon_;
  double lat_;
};

struct SphericalAngles {
  double azimuth;  // radians, lon * pi / 180
  double polar;    // radians in [0, pi], measured from the north pole
};

SphericalAngles to_spherical(const Coordinate& c) noexcept;

/// Axial hexagon coordinate relative to the grid centre.
struct AxialHex {
  int q;
  int r;

  friend bool operator==(const AxialHex&, const AxialHex&) = default;
};

/// Hexagonal distance between two axial cells.
int hex_distance(AxialHex a, AxialHex b) noexcept;

/// Number of cells in a hexagonal grid with `rings` rings around the centre.
std::size_t hex_cell_count(int rings);

/// Canonical cell order: the centre, then ring 1, ring 2, ... Each ring
/// starts at axial offset (-j, +j) and walks the six sides in the fixed
/// direction order (+1,0) (+1,-1) (0,-1) (-1,0) (-1,+1) (0,+1).
const std::vector<AxialHex>& hex_layout(int rings);

/// Position of an axial cell in the (2k+1)x(2k+1) h2 square: row = k - r,
/// col = k + q.
struct SquareIndex {
  int row;
  int col;
};
SquareIndex h2_position(AxialHex h, int rings) noexcept;

/// Hexagonal ring grid. Cell `i` follows hex_layout(rings)[i]; each cell is
/// a channel vector of length `channels`, stored cell-major.
class HexGrid {
 public:
  HexGrid(int rings, std::size_t channels);
  HexGrid(int rings, std::size_t channels, std::vector<double> values);

  int rings() const noexcept { return rings_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t cell_count() const noexcept { return values_.size() / channels_; }

  double& at(std::size_t cell, std::size_t channel);
  double at(std::size_t cell, std::size_t channel) const;

  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const HexGrid&, const HexGrid&) = default;

 private:
  int rings_;
  std::size_t channels_;
  std::vector<double> values_;
};

/// Square image of a HexGrid with the cell-validity mask. Data are stored
/// row-major as side x side x channels.
class SquareGrid {
 public:
  SquareGrid(int rings, std::size_t channels);

  int rings() const noexcept { return rings_; }
  std::size_t side() const noexcept { return side_; }
  std::size_t channels() const noexcept { return channels_; }

  double& at(std::size_t row, std::size_t col, std::size_t channel);
  double at(std::size_t row, std::size_t col, std::size_t channel) const;
  bool valid(std::size_t row, std::size_t col) const;

  const std::vector<double>& data() const noexcept { return data_; }
  const std::vector<bool>& mask() const noexcept { return mask_; }

 private:
  int rings_;
  std::size_t side_;
  std::size_t channels_;
  std::vector<double> data_;
  std::vector<bool> mask_;
};

/// Boolean (2k+1)x(2k+1) grid, row-major.
struct SquareMask {
  std::size_t side = 0;
  std::vector<bool> cells;

  bool at(std::size_t row, std::size_t col) const { return cells[row * side + col]; }
  std::size_t count() const;
};

/// Validity mask of an h2 square: true where |col - row| <= k. Used both for
/// grids and for convolution filters, whose upper-right and lower-left
/// corner triangles of size k are masked.
SquareMask square_filter_mask(int rings);

SquareGrid hex_to_square(const HexGrid& grid);
HexGrid square_to_hex(const SquareGrid& square);

/// Indices (into the canonical layout) of the cells adjacent to `cell`.
std::vector<std::size_t> hex_neighbors(int rings, std::size_t cell);

}  // namespace mvse
