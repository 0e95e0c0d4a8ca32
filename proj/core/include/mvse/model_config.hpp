// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mvse {

/// OSM view layout: 37 hexagons (3 rings) of 6 tag categories.
inline constexpr int kOsmRings = 3;
inline constexpr std::size_t kOsmChannels = 6;

/// Architecture and training hyperparameters. A view is disabled by setting
/// its dimension to zero.
struct ModelConfig {
  std::string name = "custom";

  // Location encoder.
  int sh_degree = 7;  // L; (L+1)^2 = 64 basis functions
  std::vector<std::size_t> siren_widths{128, 128};
  double siren_omega0 = 30.0;

  // Joint embedding and view dimensions.
  std::size_t embed_dim = 16;   // d
  std::size_t gs_dim = 32;      // d_GS
  std::size_t osm_dim = 16;     // d_OSM
  std::size_t feature_dim = 512;  // F, width of the precomputed satellite features
  std::size_t gs_hidden = 128;

  // OSM encoder.
  std::vector<std::size_t> osm_filters{8, 16};
  int osm_filter_rings = 1;

  std::size_t fusion_width = 128;

  // Training.
  double temperature = 0.07;
  double learning_rate = 1e-5;
  double weight_decay = 0.01;
  std::size_t epochs = 500;
  std::size_t batch_size = 128;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  bool trap_non_finite = true;

  bool gs_enabled() const noexcept { return gs_dim > 0; }
  bool osm_enabled() const noexcept { return osm_dim > 0; }
  std::size_t fusion_input_dim() const noexcept { return gs_dim + osm_dim; }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Names of the built-in presets.
const std::vector<std::string>& preset_names();

/// One of EU8_GS32_OSM32, EU16_GS32_OSM16, EU16_OSM16, EU32_GS96_OSM32,
/// EU64_GS64. Throws ConfigError for an unknown name.
ModelConfig preset(std::string_view name);

/// JSON round trip. from_json accepts an optional "preset" key whose values
/// are overridden by any other keys present.
std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);

}  // namespace mvse
