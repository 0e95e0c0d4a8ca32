// SPDX-License-Identifier: Apache-2.0
#include "mvse/adam.hpp"

#include <cmath>

#include "mvse/error.hpp"

namespace mvse {

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, const AdamOptions& opt) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adam_update", {theta.size()}, {grad.size()});
  }
  if (t == 0) throw InvalidArgument("adam_update: step counter starts at 1");
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  const double decay = opt.lr * opt.weight_decay;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    if (decay != 0.0) theta[i] -= decay * theta[i];
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

void adam_step(ad::ParameterSet& params, AdamState& state) {
  ++state.step;
  for (auto& p : params) {
    auto mit = state.first_moment.try_emplace(p->name, p->value.shape()).first;
    auto vit = state.second_moment.try_emplace(p->name, p->value.shape()).first;
    if (mit->second.shape() != p->value.shape()) throw ShapeError("adam_step(" + p->name + ")", p->value.shape(), mit->second.shape());
    if (p->grad.shape() != p->value.shape()) throw ShapeError("adam_step(" + p->name + ")", p->value.shape(), p->grad.shape());
    adam_update(p->value.data(), p->grad.data(), mit->second.data(), vit->second.data(), state.step, state.options);
  }
}

}  // namespace mvse
