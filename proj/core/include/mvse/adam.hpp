// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>

#include "mvse/autodiff.hpp"

namespace mvse {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Moment accumulators keyed by parameter name, plus the shared step count.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::unordered_map<std::string, Tensor> first_moment;
  std::unordered_map<std::string, Tensor> second_moment;
};

/// One Adam update of a flat buffer at (1-based) step `t`. Weight decay is
/// decoupled: theta <- theta - lr * wd * theta happens before the moment
/// update and does not enter m or v.
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, const AdamOptions& opt);

/// Advances the step counter and updates every parameter from its grad.
void adam_step(ad::ParameterSet& params, AdamState& state);

}  // namespace mvse
