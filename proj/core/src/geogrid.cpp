// SPDX-License-Identifier: Apache-2.0
#include "mvse/geogrid.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "mvse/error.hpp"

namespace mvse {

Coordinate::Coordinate(double lon, double lat) : lon_(lon), lat_(lat) {
  if (!std::isfinite(lon) || !std::isfinite(lat)) {
    throw InvalidArgument("coordinate must be finite");
  }
  if (lon < -180.0 || lon > 180.0) {
    throw InvalidArgument("longitude out of range [-180, 180]: " + std::to_string(lon));
  }
  if (lat < -90.0 || lat > 90.0) {
    throw InvalidArgument("latitude out of range [-90, 90]: " + std::to_string(lat));
  }
}

SphericalAngles to_spherical(const Coordinate& c) noexcept {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double polar = c.lat() == -90.0 ? std::numbers::pi : (90.0 - c.lat()) * kDeg;
  return {c.lon() * kDeg, polar};
}

int hex_distance(AxialHex a, AxialHex b) noexcept {
  const int dq = a.q - b.q;
  const int dr = a.r - b.r;
  return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

std::size_t hex_cell_count(int rings) {
  if (rings < 0) throw InvalidArgument("ring count must be non-negative");
  const auto k = static_cast<std::size_t>(rings);
  return 3 * k * (k + 1) + 1;
}

namespace {

constexpr std::array<AxialHex, 6> kDirections{{{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}}};

std::vector<AxialHex> build_layout(int rings) {
  std::vector<AxialHex> cells;
  cells.reserve(hex_cell_count(rings));
  cells.push_back({0, 0});
  for (int j = 1; j <= rings; ++j) {
    AxialHex h{-j, j};
    for (const auto& d : kDirections) {
      for (int s = 0; s < j; ++s) {
        cells.push_back(h);
        h.q += d.q;
        h.r += d.r;
      }
    }
  }
  return cells;
}

}  // namespace

const std::vector<AxialHex>& hex_layout(int rings) {
  if (rings < 0) throw InvalidArgument("ring count must be non-negative");
  static std::mutex mu;
  static std::map<int, std::vector<AxialHex>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(rings);
  if (it == cache.end()) it = cache.emplace(rings, build_layout(rings)).first;
  return it->second;
}

SquareIndex h2_position(AxialHex h, int rings) noexcept { return {rings - h.r, rings + h.q}; }

HexGrid::HexGrid(int rings, std::size_t channels)
    : HexGrid(rings, channels, std::vector<double>(hex_cell_count(rings) * channels, 0.0)) {}

HexGrid::HexGrid(int rings, std::size_t channels, std::vector<double> values)
    : rings_(rings), channels_(channels), values_(std::move(values)) {
  if (channels == 0) throw InvalidArgument("hex grid needs at least one channel");
  const std::size_t expected = hex_cell_count(rings) * channels;
  if (values_.size() != expected) {
    throw InvalidArgument("hex grid with " + std::to_string(rings) + " rings and " +
                          std::to_string(channels) + " channels needs " +
                          std::to_string(expected) + " values, got " +
                          std::to_string(values_.size()));
  }
}

double& HexGrid::at(std::size_t cell, std::size_t channel) {
  return values_.at(cell * channels_ + channel);
}

double HexGrid::at(std::size_t cell, std::size_t channel) const {
  return values_.at(cell * channels_ + channel);
}

std::size_t SquareMask::count() const {
  std::size_t n = 0;
  for (bool b : cells) n += b ? 1 : 0;
  return n;
}

SquareMask square_filter_mask(int rings) {
  if (rings < 0) throw InvalidArgument("ring count must be non-negative");
  SquareMask m;
  m.side = static_cast<std::size_t>(2 * rings + 1);
  m.cells.resize(m.side * m.side);
  for (int row = 0; row < static_cast<int>(m.side); ++row) {
    for (int col = 0; col < static_cast<int>(m.side); ++col) {
      m.cells[static_cast<std::size_t>(row) * m.side + static_cast<std::size_t>(col)] =
          std::abs(col - row) <= rings;
    }
  }
  return m;
}

SquareGrid::SquareGrid(int rings, std::size_t channels)
    : rings_(rings),
      side_(static_cast<std::size_t>(2 * rings + 1)),
      channels_(channels),
      data_(side_ * side_ * channels, 0.0),
      mask_(square_filter_mask(rings).cells) {}

double& SquareGrid::at(std::size_t row, std::size_t col, std::size_t channel) {
  return data_.at((row * side_ + col) * channels_ + channel);
}

double SquareGrid::at(std::size_t row, std::size_t col, std::size_t channel) const {
  return data_.at((row * side_ + col) * channels_ + channel);
}

bool SquareGrid::valid(std::size_t row, std::size_t col) const { return mask_.at(row * side_ + col); }

SquareGrid hex_to_square(const HexGrid& grid) {
  SquareGrid out(grid.rings(), grid.channels());
  const auto& layout = hex_layout(grid.rings());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto pos = h2_position(layout[i], grid.rings());
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      out.at(static_cast<std::size_t>(pos.row), static_cast<std::size_t>(pos.col), c) = grid.at(i, c);
    }
  }
  return out;
}

HexGrid square_to_hex(const SquareGrid& square) {
  HexGrid out(square.rings(), square.channels());
  const auto& layout = hex_layout(square.rings());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto pos = h2_position(layout[i], square.rings());
    for (std::size_t c = 0; c < square.channels(); ++c) {
      out.at(i, c) = square.at(static_cast<std::size_t>(pos.row), static_cast<std::size_t>(pos.col), c);
    }
  }
  return out;
}

std::vector<std::size_t> hex_neighbors(int rings, std::size_t cell) {
  const auto& layout = hex_layout(rings);
  const AxialHex center = layout.at(cell);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < layout.size(); ++j) {
    if (hex_distance(center, layout[j]) == 1) out.push_back(j);
  }
  return out;
}

}  // namespace mvse
