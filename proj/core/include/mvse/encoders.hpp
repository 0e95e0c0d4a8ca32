// SPDX-License-Identifier: Apache-2.0
//
// The four networks of the multi-view model:
//
//   location encoder  coordinate -> SH basis -> w * Y -> Siren -> R^d
//   OSM encoder       37x6 counts -> h2 square -> 2x (masked conv, norm, ReLU)
//                     -> flatten valid cells -> dense -> R^d_OSM
//   GS encoder        precomputed features -> standardise -> dense, ReLU,
//                     dense -> R^d_GS
//   fusion            concat(enabled views) -> dense, ReLU -> dense -> R^d
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvse/autodiff.hpp"
#include "mvse/geogrid.hpp"
#include "mvse/model_config.hpp"
#include "mvse/record.hpp"
#include "mvse/tensor.hpp"

namespace mvse {

/// Standardisation statistics estimated on the training split. OSM
/// statistics are per channel in log(1 + count) space.
struct InputNormalization {
  std::vector<double> osm_mean;
  std::vector<double> osm_std;
  std::vector<double> gs_mean;
  std::vector<double> gs_std;

  /// Identity statistics (mean 0, std 1) sized for `config`.
  static InputNormalization identity(const ModelConfig& config);
  /// Estimates statistics from the views of `records` that `config` enables.
  static InputNormalization fit(std::span<const LocationRecord> records, const ModelConfig& config);

  friend bool operator==(const InputNormalization&, const InputNormalization&) = default;
};

class MultiViewModel {
 public:
  /// Fresh model with seeded initialisation. Validates `config`.
  MultiViewModel(ModelConfig config, std::uint64_t init_seed);
  /// Model from stored parameters; names and shapes must match `config`.
  MultiViewModel(ModelConfig config, ad::ParameterSet params, InputNormalization norm);

  MultiViewModel(MultiViewModel&&) = default;
  MultiViewModel& operator=(MultiViewModel&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  ad::ParameterSet& parameters() noexcept { return params_; }
  const ad::ParameterSet& parameters() const noexcept { return params_; }
  const InputNormalization& normalization() const noexcept { return norm_; }
  void set_normalization(InputNormalization norm);

  std::size_t basis_size() const noexcept;

  // -- input preparation (constant tensors) --------------------------------

  /// [B, (L+1)^2] spherical-harmonic rows.
  Tensor location_inputs(std::span<const Coordinate> coords) const;
  /// [B, 7, 7, 6] normalised h2 squares from raw 222-count vectors.
  Tensor osm_inputs(std::span<const std::vector<double>* const> counts) const;
  /// [B, F] standardised satellite features.
  Tensor gs_inputs(std::span<const std::vector<double>* const> features) const;

  /// Writes one normalised h2 square (7*7*6 values) for a count vector.
  void osm_square(std::span<const double> counts, std::span<double> out) const;
  void gs_row(std::span<const double> features, std::span<double> out) const;

  // -- differentiable forward passes ----------------------------------------
  // Parameters enter the tape through Tape::parameter(const&), so gradients
  // are recorded only when the tape was bound to parameters().

  ad::Var location_forward(ad::Tape& tape, const Tensor& basis) const;
  /// Siren part alone, applied to an already weighted basis [B, K].
  ad::Var siren_forward(ad::Tape& tape, ad::Var x) const;
  ad::Var osm_forward(ad::Tape& tape, const Tensor& squares) const;
  ad::Var gs_forward(ad::Tape& tape, const Tensor& features, bool activations = true) const;
  ad::Var fusion_forward(ad::Tape& tape, std::optional<ad::Var> gs, std::optional<ad::Var> osm) const;

  // -- single-item inference -------------------------------------------------

  std::vector<double> location_encode(const Coordinate& c) const;
  /// [B, d] location embeddings.
  Tensor location_encode_batch(std::span<const Coordinate> coords) const;
  /// Raw 222-count vector -> d_OSM vector. ConfigError if the view is off.
  std::vector<double> osm_encode(std::span<const double> counts) const;
  std::vector<double> osm_encode(const HexGrid& grid) const;
  /// Raw feature vector -> d_GS vector. ConfigError if the view is off.
  std::vector<double> gs_encode(std::span<const double> features, bool activations = true) const;
  std::vector<double> fusion_encode(const std::vector<double>* gs, const std::vector<double>* osm) const;

 private:
  void init_parameters(std::uint64_t seed);
  void check_parameters() const;
  ad::Var param(ad::Tape& tape, std::string_view name) const;

  ModelConfig config_;
  ad::ParameterSet params_;
  InputNormalization norm_;
  SquareMask grid_mask_;
  SquareMask filter_mask_;
};

}  // namespace mvse
