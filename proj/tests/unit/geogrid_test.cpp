// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "mvse/error.hpp"
#include "mvse/geogrid.hpp"
#include "mvse/random.hpp"

namespace mvse {
namespace {

TEST(HexCellCount, KnownRingCounts) {
  EXPECT_EQ(hex_cell_count(3), 37u);
  EXPECT_EQ(hex_cell_count(0), 1u);
  EXPECT_EQ(hex_cell_count(1), 7u);
  EXPECT_THROW(hex_cell_count(-1), InvalidArgument);
}

TEST(HexLayout, EnumeratesEveryCellWithinRingsOnce) {
  for (int k = 0; k <= 5; ++k) {
    const auto& cells = hex_layout(k);
    ASSERT_EQ(cells.size(), hex_cell_count(k));
    EXPECT_EQ(cells.front(), (AxialHex{0, 0}));
    std::set<std::pair<int, int>> seen;
    int last_ring = 0;
    for (const auto& c : cells) {
      const int ring = hex_distance({0, 0}, c);
      EXPECT_LE(ring, k);
      EXPECT_GE(ring, last_ring);  // rings outward
      last_ring = ring;
      EXPECT_TRUE(seen.insert({c.q, c.r}).second);
    }
  }
}

TEST(HexLayout, RingOneOrder) {
  const auto& c = hex_layout(1);
  const std::vector<AxialHex> expected{{0, 0}, {-1, 1}, {0, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, 0}};
  EXPECT_EQ(c, expected);
}

TEST(SquareFilterMask, Cardinalities) {
  const auto m1 = square_filter_mask(1);
  EXPECT_EQ(m1.side, 3u);
  EXPECT_EQ(m1.count(), 7u);
  EXPECT_FALSE(m1.at(0, 2));  // upper right
  EXPECT_FALSE(m1.at(2, 0));  // lower left
  EXPECT_TRUE(m1.at(1, 1));
  const auto m0 = square_filter_mask(0);
  EXPECT_EQ(m0.side, 1u);
  EXPECT_EQ(m0.count(), 1u);
  EXPECT_EQ(square_filter_mask(2).count(), 19u);
  for (int k = 0; k <= 5; ++k) EXPECT_EQ(square_filter_mask(k).count(), hex_cell_count(k)) << k;
}

TEST(SquareFilterMask, CornerTrianglesAreMasked) {
  for (int k = 1; k <= 4; ++k) {
    const auto m = square_filter_mask(k);
    const auto side = static_cast<int>(m.side);
    int upper = 0, lower = 0;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        if (m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
        (c > r ? upper : lower)++;
      }
    }
    EXPECT_EQ(upper, k * (k + 1) / 2);
    EXPECT_EQ(lower, k * (k + 1) / 2);
  }
}

TEST(HexToSquare, ThreeRingsGiveSevenBySevenWithTwelveMasked) {
  HexGrid g(3, 1);
  const auto s = hex_to_square(g);
  EXPECT_EQ(s.side(), 7u);
  std::size_t valid = 0;
  for (bool b : s.mask()) valid += b;
  EXPECT_EQ(valid, 37u);
  EXPECT_EQ(49u - valid, 12u);
}

TEST(HexToSquare, ZeroRingsIsOneByOne) {
  HexGrid g(0, 2, {3.0, 4.0});
  const auto s = hex_to_square(g);
  EXPECT_EQ(s.side(), 1u);
  EXPECT_TRUE(s.valid(0, 0));
  EXPECT_EQ(s.at(0, 0, 1), 4.0);
}

TEST(HexToSquare, OnesPassThroughAndMaskedCellsStayZero) {
  HexGrid g(3, 1, std::vector<double>(37, 1.0));
  const auto s = hex_to_square(g);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(s.at(r, c, 0), s.valid(r, c) ? 1.0 : 0.0);
}

TEST(HexToSquare, RoundTripIsExact) {
  Rng rng(11);
  for (int k = 0; k <= 3; ++k) {
    for (std::size_t ch : {1u, 6u}) {
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> v(hex_cell_count(k) * ch);
        for (auto& x : v) x = rng.normal();
        HexGrid g(k, ch, v);
        EXPECT_EQ(square_to_hex(hex_to_square(g)), g);
      }
    }
  }
}

TEST(HexToSquare, NeighboursLandInsideTheUnitFilter) {
  const auto filter = square_filter_mask(1);
  for (int k = 1; k <= 4; ++k) {
    const auto& cells = hex_layout(k);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto a = h2_position(cells[i], k);
      for (std::size_t j : hex_neighbors(k, i)) {
        const auto b = h2_position(cells[j], k);
        const int dr = b.row - a.row;
        const int dc = b.col - a.col;
        ASSERT_LE(std::abs(dr), 1);
        ASSERT_LE(std::abs(dc), 1);
        EXPECT_TRUE(filter.at(static_cast<std::size_t>(dr + 1), static_cast<std::size_t>(dc + 1)));
      }
    }
  }
}

TEST(HexNeighbors, InteriorCellHasSix) {
  EXPECT_EQ(hex_neighbors(3, 0).size(), 6u);
  // Ring-3 corner cell touches three cells of the grid.
  EXPECT_EQ(hex_neighbors(3, hex_cell_count(2)).size(), 3u);
}

TEST(HexGrid, RejectsWrongLength) {
  EXPECT_THROW(HexGrid(3, 6, std::vector<double>(221)), InvalidArgument);
  EXPECT_THROW(HexGrid(1, 0), InvalidArgument);
}

TEST(Coordinate, ValidatesRange) {
  EXPECT_NO_THROW(Coordinate(-180, -90));
  EXPECT_NO_THROW(Coordinate(180, 90));
  EXPECT_THROW(Coordinate(180.0001, 0), InvalidArgument);
  EXPECT_THROW(Coordinate(0, -90.5), InvalidArgument);
  EXPECT_THROW(Coordinate(std::nan(""), 0), InvalidArgument);
  EXPECT_THROW(Coordinate(0, INFINITY), InvalidArgument);
}

TEST(ToSpherical, Conventions) {
  const auto np = to_spherical(Coordinate(0, 90));
  EXPECT_EQ(np.azimuth, 0.0);
  EXPECT_EQ(np.polar, 0.0);
  const auto eq = to_spherical(Coordinate(180, 0));
  EXPECT_DOUBLE_EQ(eq.azimuth, std::numbers::pi);
  EXPECT_DOUBLE_EQ(eq.polar, std::numbers::pi / 2);
  EXPECT_EQ(to_spherical(Coordinate(0, -90)).polar, std::numbers::pi);
  const auto leuven = to_spherical(Coordinate(4.70591, 50.88173));
  // Oracle: the degree-to-radian conversion written out by hand.
  EXPECT_NEAR(leuven.azimuth, 4.70591 * 3.14159265358979323846 / 180.0, 1e-15);
  EXPECT_NEAR(leuven.polar, (90.0 - 50.88173) * 3.14159265358979323846 / 180.0, 1e-15);
  EXPECT_NEAR(leuven.azimuth, 0.0821336238, 1e-10);
  EXPECT_NEAR(leuven.polar, 0.6827426092, 1e-10);
}

}  // namespace
}  // namespace mvse
