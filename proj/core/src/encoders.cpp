// SPDX-License-Identifier: Apache-2.0
#include "mvse/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvse/error.hpp"
#include "mvse/random.hpp"
#include "mvse/spherical_harmonics.hpp"

namespace mvse {

namespace {

constexpr std::size_t kOsmCells = 37;
constexpr std::size_t kOsmSide = 7;
constexpr double kMinStd = 1e-12;

enum class Init { Uniform, Constant };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
  double value;  // uniform bound or constant
};

std::vector<ParamSpec> parameter_layout(const ModelConfig& c) {
  std::vector<ParamSpec> out;
  const std::size_t K = sh_basis_size(c.sh_degree);
  out.push_back({"le.pe.weight", {K}, Init::Constant, 1.0});
  std::size_t in = K;
  for (std::size_t i = 0; i < c.siren_widths.size(); ++i) {
    const std::size_t w = c.siren_widths[i];
    const double bound = i == 0 ? 1.0 / static_cast<double>(in) : std::sqrt(6.0 / static_cast<double>(in)) / c.siren_omega0;
    const std::string prefix = "le.siren." + std::to_string(i);
    out.push_back({prefix + ".weight", {in, w}, Init::Uniform, bound});
    out.push_back({prefix + ".bias", {w}, Init::Uniform, 1.0 / std::sqrt(static_cast<double>(in))});
    in = w;
  }
  out.push_back({"le.out.weight", {in, c.embed_dim}, Init::Uniform, std::sqrt(6.0 / static_cast<double>(in)) / c.siren_omega0});
  out.push_back({"le.out.bias", {c.embed_dim}, Init::Uniform, 1.0 / std::sqrt(static_cast<double>(in))});

  auto dense = [&out](const std::string& prefix, std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    out.push_back({prefix + ".weight", {fan_in, fan_out}, Init::Uniform, bound});
    out.push_back({prefix + ".bias", {fan_out}, Init::Uniform, bound});
  };

  if (c.osm_enabled()) {
    const std::size_t K2 = static_cast<std::size_t>(2 * c.osm_filter_rings + 1);
    const std::size_t taps = hex_cell_count(c.osm_filter_rings);
    std::size_t ci = kOsmChannels;
    for (std::size_t i = 0; i < c.osm_filters.size(); ++i) {
      const std::size_t co = c.osm_filters[i];
      const std::string prefix = "osm.conv." + std::to_string(i);
      const double fan_in = static_cast<double>(taps * ci);
      out.push_back({prefix + ".weight", {co, K2, K2, ci}, Init::Uniform, std::sqrt(6.0 / fan_in)});
      out.push_back({prefix + ".bias", {co}, Init::Uniform, 1.0 / std::sqrt(fan_in)});
      out.push_back({"osm.norm." + std::to_string(i) + ".gain", {co}, Init::Constant, 1.0});
      out.push_back({"osm.norm." + std::to_string(i) + ".bias", {co}, Init::Constant, 0.0});
      ci = co;
    }
    dense("osm.out", kOsmCells * ci, c.osm_dim);
  }
  if (c.gs_enabled()) {
    dense("gs.hidden", c.feature_dim, c.gs_hidden);
    dense("gs.out", c.gs_hidden, c.gs_dim);
  }
  dense("fusion.hidden", c.fusion_input_dim(), c.fusion_width);
  dense("fusion.out", c.fusion_width, c.embed_dim);
  return out;
}

void standardize_into(std::span<const double> xs, std::span<const double> mean, std::span<const double> sd,
                      std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - mean[i]) / sd[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// InputNormalization

InputNormalization InputNormalization::identity(const ModelConfig& config) {
  InputNormalization n;
  if (config.osm_enabled()) {
    n.osm_mean.assign(kOsmChannels, 0.0);
    n.osm_std.assign(kOsmChannels, 1.0);
  }
  if (config.gs_enabled()) {
    n.gs_mean.assign(config.feature_dim, 0.0);
    n.gs_std.assign(config.feature_dim, 1.0);
  }
  return n;
}

InputNormalization InputNormalization::fit(std::span<const LocationRecord> records, const ModelConfig& config) {
  InputNormalization n = identity(config);
  if (records.empty()) return n;
  const double count = static_cast<double>(records.size());
  if (config.osm_enabled()) {
    std::vector<double> sum(kOsmChannels, 0.0), sq(kOsmChannels, 0.0);
    for (const auto& r : records) {
      if (r.osm_counts.size() != kOsmCells * kOsmChannels) throw ConfigError("record " + r.id + " lacks OSM counts");
      for (std::size_t i = 0; i < r.osm_counts.size(); ++i) {
        const double v = std::log1p(r.osm_counts[i]);
        sum[i % kOsmChannels] += v;
      }
    }
    const double m = count * static_cast<double>(kOsmCells);
    for (std::size_t c = 0; c < kOsmChannels; ++c) n.osm_mean[c] = sum[c] / m;
    for (const auto& r : records)
      for (std::size_t i = 0; i < r.osm_counts.size(); ++i) {
        const double d = std::log1p(r.osm_counts[i]) - n.osm_mean[i % kOsmChannels];
        sq[i % kOsmChannels] += d * d;
      }
    for (std::size_t c = 0; c < kOsmChannels; ++c) {
      const double sd = std::sqrt(sq[c] / m);
      n.osm_std[c] = sd > kMinStd ? sd : 1.0;
    }
  }
  if (config.gs_enabled()) {
    const std::size_t F = config.feature_dim;
    std::vector<double> sum(F, 0.0), sq(F, 0.0);
    for (const auto& r : records) {
      if (r.gs_features.size() != F) throw ConfigError("record " + r.id + " has " + std::to_string(r.gs_features.size()) + " satellite features, expected " + std::to_string(F));
      for (std::size_t i = 0; i < F; ++i) sum[i] += r.gs_features[i];
    }
    for (std::size_t i = 0; i < F; ++i) n.gs_mean[i] = sum[i] / count;
    for (const auto& r : records)
      for (std::size_t i = 0; i < F; ++i) {
        const double d = r.gs_features[i] - n.gs_mean[i];
        sq[i] += d * d;
      }
    for (std::size_t i = 0; i < F; ++i) {
      const double sd = std::sqrt(sq[i] / count);
      n.gs_std[i] = sd > kMinStd ? sd : 1.0;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// MultiViewModel

MultiViewModel::MultiViewModel(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)),
      grid_mask_(square_filter_mask(kOsmRings)),
      filter_mask_(square_filter_mask(std::clamp(config_.osm_filter_rings, 0, kOsmRings))) {
  config_.validate();
  norm_ = InputNormalization::identity(config_);
  init_parameters(init_seed);
}

MultiViewModel::MultiViewModel(ModelConfig config, ad::ParameterSet params, InputNormalization norm)
    : config_(std::move(config)),
      params_(std::move(params)),
      grid_mask_(square_filter_mask(kOsmRings)),
      filter_mask_(square_filter_mask(std::clamp(config_.osm_filter_rings, 0, kOsmRings))) {
  config_.validate();
  check_parameters();
  set_normalization(std::move(norm));
}

void MultiViewModel::set_normalization(InputNormalization norm) {
  const auto want = InputNormalization::identity(config_);
  if (norm.osm_mean.size() != want.osm_mean.size() || norm.osm_std.size() != want.osm_std.size() ||
      norm.gs_mean.size() != want.gs_mean.size() || norm.gs_std.size() != want.gs_std.size()) {
    throw ConfigError("normalization statistics do not match the enabled views");
  }
  norm_ = std::move(norm);
}

void MultiViewModel::init_parameters(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& spec : parameter_layout(config_)) {
    Tensor t(spec.shape);
    if (spec.init == Init::Constant) {
      t.fill(spec.value);
    } else {
      for (auto& v : t.data()) v = rng.uniform(-spec.value, spec.value);
    }
    params_.add(spec.name, std::move(t));
  }
}

void MultiViewModel::check_parameters() const {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ConfigError("parameter set has " + std::to_string(params_.size()) + " tensors, config expects " +
                      std::to_string(layout.size()));
  }
  for (const auto& spec : layout) {
    if (!params_.contains(spec.name)) throw ConfigError("missing parameter: " + spec.name);
    const auto& p = params_.get(spec.name);
    if (p.value.shape() != spec.shape) throw ShapeError("parameter " + spec.name, p.value.shape(), spec.shape);
  }
}

ad::Var MultiViewModel::param(ad::Tape& tape, std::string_view name) const { return tape.parameter(params_.get(name)); }

std::size_t MultiViewModel::basis_size() const noexcept { return sh_basis_size(config_.sh_degree); }

Tensor MultiViewModel::location_inputs(std::span<const Coordinate> coords) const {
  const std::size_t K = basis_size();
  Tensor out({coords.size(), K});
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto ang = to_spherical(coords[i]);
    sh_basis(ang.azimuth, ang.polar, config_.sh_degree, out.data().subspan(i * K, K));
  }
  return out;
}

void MultiViewModel::osm_square(std::span<const double> counts, std::span<double> out) const {
  if (!config_.osm_enabled()) throw ConfigError("OSM view is disabled (d_OSM = 0)");
  if (counts.size() != kOsmCells * kOsmChannels) throw ShapeError("osm_square", {counts.size()}, {kOsmCells, kOsmChannels});
  if (out.size() != kOsmSide * kOsmSide * kOsmChannels) throw ShapeError("osm_square (output)", {out.size()}, {kOsmSide, kOsmSide, kOsmChannels});
  std::fill(out.begin(), out.end(), 0.0);
  const auto& layout = hex_layout(kOsmRings);
  for (std::size_t cell = 0; cell < kOsmCells; ++cell) {
    const auto pos = h2_position(layout[cell], kOsmRings);
    double* dst = &out[(static_cast<std::size_t>(pos.row) * kOsmSide + static_cast<std::size_t>(pos.col)) * kOsmChannels];
    for (std::size_t c = 0; c < kOsmChannels; ++c) {
      const double v = counts[cell * kOsmChannels + c];
      if (!(v >= 0.0)) throw InvalidArgument("OSM counts must be non-negative");
      dst[c] = (std::log1p(v) - norm_.osm_mean[c]) / norm_.osm_std[c];
    }
  }
}

void MultiViewModel::gs_row(std::span<const double> features, std::span<double> out) const {
  if (!config_.gs_enabled()) throw ConfigError("satellite view is disabled (d_GS = 0)");
  if (features.size() != config_.feature_dim) throw ShapeError("gs_row (feature length F)", {features.size()}, {config_.feature_dim});
  standardize_into(features, norm_.gs_mean, norm_.gs_std, out);
}

Tensor MultiViewModel::osm_inputs(std::span<const std::vector<double>* const> counts) const {
  const std::size_t per = kOsmSide * kOsmSide * kOsmChannels;
  Tensor out({counts.size(), kOsmSide, kOsmSide, kOsmChannels});
  for (std::size_t i = 0; i < counts.size(); ++i) osm_square(*counts[i], out.data().subspan(i * per, per));
  return out;
}

Tensor MultiViewModel::gs_inputs(std::span<const std::vector<double>* const> features) const {
  const std::size_t F = config_.feature_dim;
  Tensor out({features.size(), F});
  for (std::size_t i = 0; i < features.size(); ++i) gs_row(*features[i], out.data().subspan(i * F, F));
  return out;
}

ad::Var MultiViewModel::siren_forward(ad::Tape& tape, ad::Var x) const {
  for (std::size_t i = 0; i < config_.siren_widths.size(); ++i) {
    const std::string prefix = "le.siren." + std::to_string(i);
    auto h = ad::add_bias(ad::matmul(x, param(tape, prefix + ".weight")), param(tape, prefix + ".bias"));
    x = ad::sin(ad::scale(h, config_.siren_omega0));
  }
  return ad::add_bias(ad::matmul(x, param(tape, "le.out.weight")), param(tape, "le.out.bias"));
}

ad::Var MultiViewModel::location_forward(ad::Tape& tape, const Tensor& basis) const {
  if (basis.rank() != 2 || basis.dim(1) != basis_size()) throw ShapeError("location_forward", basis.shape(), {0, basis_size()});
  auto pe = ad::mul_broadcast(tape.constant(basis), param(tape, "le.pe.weight"));
  return siren_forward(tape, pe);
}

ad::Var MultiViewModel::osm_forward(ad::Tape& tape, const Tensor& squares) const {
  if (!config_.osm_enabled()) throw ConfigError("OSM view is disabled (d_OSM = 0)");
  auto x = tape.constant(squares);
  for (std::size_t i = 0; i < config_.osm_filters.size(); ++i) {
    const std::string conv = "osm.conv." + std::to_string(i);
    const std::string norm = "osm.norm." + std::to_string(i);
    x = ad::masked_conv2d(x, param(tape, conv + ".weight"), param(tape, conv + ".bias"), filter_mask_, grid_mask_);
    x = ad::layer_norm(x, param(tape, norm + ".gain"), param(tape, norm + ".bias"), &grid_mask_);
    x = ad::relu(x);
  }
  auto flat = ad::gather_cells(x, grid_mask_);
  return ad::add_bias(ad::matmul(flat, param(tape, "osm.out.weight")), param(tape, "osm.out.bias"));
}

ad::Var MultiViewModel::gs_forward(ad::Tape& tape, const Tensor& features, bool activations) const {
  if (!config_.gs_enabled()) throw ConfigError("satellite view is disabled (d_GS = 0)");
  if (features.rank() != 2 || features.dim(1) != config_.feature_dim) {
    throw ShapeError("gs_forward (feature length F)", features.shape(), {0, config_.feature_dim});
  }
  auto h = ad::add_bias(ad::matmul(tape.constant(features), param(tape, "gs.hidden.weight")), param(tape, "gs.hidden.bias"));
  if (activations) h = ad::relu(h);
  return ad::add_bias(ad::matmul(h, param(tape, "gs.out.weight")), param(tape, "gs.out.bias"));
}

ad::Var MultiViewModel::fusion_forward(ad::Tape& tape, std::optional<ad::Var> gs, std::optional<ad::Var> osm) const {
  std::vector<ad::Var> parts;
  if (config_.gs_enabled()) {
    if (!gs) throw ConfigError("fusion: satellite view output required");
    parts.push_back(*gs);
  }
  if (config_.osm_enabled()) {
    if (!osm) throw ConfigError("fusion: OSM view output required");
    parts.push_back(*osm);
  }
  auto x = parts.size() == 1 ? parts.front() : ad::concat(parts);
  auto h = ad::relu(ad::add_bias(ad::matmul(x, param(tape, "fusion.hidden.weight")), param(tape, "fusion.hidden.bias")));
  return ad::add_bias(ad::matmul(h, param(tape, "fusion.out.weight")), param(tape, "fusion.out.bias"));
}

namespace {

ad::TapeOptions inference_options(const ModelConfig& c) { return {.record_gradients = false, .trap_non_finite = c.trap_non_finite}; }

std::vector<double> to_vector(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

Tensor MultiViewModel::location_encode_batch(std::span<const Coordinate> coords) const {
  ad::Tape tape(inference_options(config_));
  return location_forward(tape, location_inputs(coords)).value();
}

std::vector<double> MultiViewModel::location_encode(const Coordinate& c) const {
  return to_vector(location_encode_batch(std::span<const Coordinate>(&c, 1)));
}

std::vector<double> MultiViewModel::osm_encode(std::span<const double> counts) const {
  if (!config_.osm_enabled()) throw ConfigError("OSM view is disabled (d_OSM = 0)");
  Tensor sq({1, kOsmSide, kOsmSide, kOsmChannels});
  osm_square(counts, sq.data());
  ad::Tape tape(inference_options(config_));
  return to_vector(osm_forward(tape, sq).value());
}

std::vector<double> MultiViewModel::osm_encode(const HexGrid& grid) const {
  if (grid.rings() != kOsmRings || grid.channels() != kOsmChannels) {
    throw ShapeError("osm_encode", {grid.cell_count(), grid.channels()}, {kOsmCells, kOsmChannels});
  }
  return osm_encode(grid.values());
}

std::vector<double> MultiViewModel::gs_encode(std::span<const double> features, bool activations) const {
  if (!config_.gs_enabled()) throw ConfigError("satellite view is disabled (d_GS = 0)");
  Tensor row({1, config_.feature_dim});
  gs_row(features, row.data());
  ad::Tape tape(inference_options(config_));
  return to_vector(gs_forward(tape, row, activations).value());
}

std::vector<double> MultiViewModel::fusion_encode(const std::vector<double>* gs, const std::vector<double>* osm) const {
  ad::Tape tape(inference_options(config_));
  std::optional<ad::Var> g, o;
  if (gs != nullptr) g = tape.constant(Tensor({1, gs->size()}, *gs));
  if (osm != nullptr) o = tape.constant(Tensor({1, osm->size()}, *osm));
  return to_vector(fusion_forward(tape, g, o).value());
}

}  // namespace mvse
