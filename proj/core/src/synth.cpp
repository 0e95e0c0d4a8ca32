// SPDX-License-Identifier: Apache-2.0
#include "mvse/synth.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "mvse/error.hpp"
#include "mvse/model_config.hpp"
#include "mvse/random.hpp"
#include "mvse/spherical_harmonics.hpp"

namespace mvse {

namespace {

constexpr int kModes = 6;
constexpr int kMinDegree = 3;
constexpr int kMaxDegree = 7;
constexpr int kGridSide = 41;
constexpr double kGradStep = 1e-3;
constexpr double kGradUnit = 10.0;
constexpr double kFeatureNoise = 0.05;
constexpr double kPriceNoise = 0.1;

double clamp_lat(double lat) { return std::min(90.0, std::max(-90.0, lat)); }
double wrap_lon(double lon) { return lon > 180.0 ? lon - 360.0 : (lon < -180.0 ? lon + 360.0 : lon); }

}  // namespace

LatentField::LatentField(const WorldOptions& o) : options_(o) {
  Rng rng(o.seed);
  for (int i = 0; i < kModes; ++i) {
    const int l = kMinDegree + static_cast<int>(rng.below(kMaxDegree - kMinDegree + 1));
    const int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * l + 1))) - l;
    modes_.push_back({l, m, rng.normal()});
    max_degree_ = std::max(max_degree_, l);
  }
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < kGridSide; ++i) {
    for (int j = 0; j < kGridSide; ++j) {
      const double lon = o.lon_min + (o.lon_max - o.lon_min) * i / (kGridSide - 1);
      const double lat = o.lat_min + (o.lat_max - o.lat_min) * j / (kGridSide - 1);
      const double v = raw(lon, lat);
      sum += v;
      sq += v * v;
    }
  }
  const double n = kGridSide * kGridSide;
  mean_ = sum / n;
  const double var = sq / n - mean_ * mean_;
  scale_ = var > 1e-18 ? 1.0 / std::sqrt(var) : 1.0;
}

double LatentField::raw(double lon, double lat) const {
  std::vector<double> basis(sh_basis_size(max_degree_));
  const auto a = to_spherical(Coordinate(wrap_lon(lon), clamp_lat(lat)));
  sh_basis(a.azimuth, a.polar, max_degree_, basis);
  double v = 0.0;
  for (const auto& mode : modes_) v += mode.amplitude * basis[sh_index(mode.l, mode.m)];
  return v;
}

double LatentField::operator()(double lon, double lat) const { return (raw(lon, lat) - mean_) * scale_; }

std::pair<double, double> LatentField::gradient(double lon, double lat) const {
  const double h = kGradStep;
  const double gx = ((*this)(lon + h, lat) - (*this)(lon - h, lat)) / (2 * h);
  const double gy = ((*this)(lon, lat + h) - (*this)(lon, lat - h)) / (2 * h);
  return {gx * kGradUnit, gy * kGradUnit};
}

std::vector<LocationRecord> synthesize_world(const WorldOptions& o) {
  if (o.count < 10) throw InvalidArgument("synthetic world needs at least 10 locations, got " + std::to_string(o.count));
  if (o.regions < 2) throw InvalidArgument("synthetic world needs at least 2 regions");
  if (o.regions > o.count) throw InvalidArgument("more regions than locations");
  if (o.feature_dim == 0) throw InvalidArgument("feature_dim must be positive");
  if (!(o.lon_min < o.lon_max) || !(o.lat_min < o.lat_max) || o.lon_min < -180.0 || o.lon_max > 180.0 ||
      o.lat_min < -90.0 || o.lat_max > 90.0) {
    throw InvalidArgument("synthetic world window is invalid");
  }

  const LatentField field(o);
  // The field consumes the first draws of Rng(seed); everything else uses its
  // own stream.
  Rng rng(o.seed * 0x2545f4914f6cdd1dULL + 1);

  // Satellite map: features = A [f, df/dlon, df/dlat] + noise.
  std::vector<double> feature_map(o.feature_dim * 3);
  for (auto& a : feature_map) a = rng.normal();
  // Per-channel log-intensity alpha + beta f.
  std::vector<double> alpha(kOsmChannels);
  std::vector<double> beta(kOsmChannels);
  for (std::size_t c = 0; c < kOsmChannels; ++c) {
    alpha[c] = rng.uniform(0.0, 1.5);
    beta[c] = rng.uniform(0.5, 1.0);
  }

  const auto& layout = hex_layout(kOsmRings);
  std::vector<LocationRecord> out(o.count);
  char id[32];
  for (std::size_t i = 0; i < o.count; ++i) {
    auto& r = out[i];
    std::snprintf(id, sizeof id, "loc-%06zu", i + 1);
    r.id = id;
    const double lon = rng.uniform(o.lon_min, o.lon_max);
    const double lat = rng.uniform(o.lat_min, o.lat_max);
    r.coordinate = Coordinate(lon, lat);

    const double f = field(lon, lat);
    const auto [gx, gy] = field.gradient(lon, lat);
    r.gs_features.resize(o.feature_dim);
    for (std::size_t k = 0; k < o.feature_dim; ++k) {
      const double* a = &feature_map[3 * k];
      r.gs_features[k] = a[0] * f + a[1] * gx + a[2] * gy + kFeatureNoise * rng.normal();
    }

    r.osm_counts.resize(layout.size() * kOsmChannels);
    for (std::size_t cell = 0; cell < layout.size(); ++cell) {
      const auto h = layout[cell];
      const double x = lon + o.hex_spacing * (h.q + 0.5 * h.r);
      const double y = lat + o.hex_spacing * (std::sqrt(3.0) / 2.0) * h.r;
      const double fc = field(x, y);
      for (std::size_t c = 0; c < kOsmChannels; ++c) {
        r.osm_counts[cell * kOsmChannels + c] = static_cast<double>(rng.poisson(std::exp(alpha[c] + beta[c] * fc)));
      }
    }

    r.aux["density"] = 1000.0 * std::exp(f);
    r.aux["price"] = 2.0 + 0.8 * f + kPriceNoise * rng.normal();
  }

  // Voronoi regions around `regions` distinct data points.
  const auto perm = rng.permutation(o.count);
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < perm.size() && seeds.size() < o.regions; ++i) {
    const auto& c = out[perm[i]].coordinate;
    bool duplicate = false;
    for (std::size_t s : seeds) duplicate = duplicate || out[s].coordinate == c;
    if (!duplicate) seeds.push_back(perm[i]);
  }
  if (seeds.size() < o.regions) throw InvalidArgument("not enough distinct locations for the requested regions");
  for (auto& r : out) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& c = out[seeds[s]].coordinate;
      const double dx = r.coordinate.lon() - c.lon();
      const double dy = r.coordinate.lat() - c.lat();
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    r.aux["region"] = static_cast<double>(best);
  }
  return out;
}

}  // namespace mvse
