// SPDX-License-Identifier: Apache-2.0
//
// One small random instance per differentiable tape op, shared by the unit
// tests and the acceptance binary.
#pragma once

#include <functional>
#include <vector>

#include "oracles.hpp"

namespace mvse::testing {

struct OpCase {
  const char* name;
  std::function<ad::Var(ad::Tape&, ad::ParameterSet&)> build;
  std::function<void(ad::ParameterSet&, Rng&)> init;
};

inline ad::Var P(ad::Tape& t, ad::ParameterSet& ps, const char* n) { return t.parameter(ps.get(n)); }

/// Gradient check of `c` through a fixed random projection to a scalar.
inline GradCheck check_op(const OpCase& c) {
  Rng rng(42);
  ad::ParameterSet ps;
  c.init(ps, rng);
  return gradient_check(ps, [&](ad::Tape& t) { return random_projection(c.build(t, ps), 7); });
}

inline std::vector<OpCase> op_cases() {
  static const SquareMask grid = square_filter_mask(3);
  static const SquareMask filter = square_filter_mask(1);
  return {
      {"matmul", [](auto& t, auto& ps) { return ad::matmul(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {4, 5}));
       }},
      {"matmul_nt", [](auto& t, auto& ps) { return ad::matmul_nt(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {5, 4}));
       }},
      {"transpose", [](auto& t, auto& ps) { return ad::transpose(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"add", [](auto& t, auto& ps) { return ad::add(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {3, 4}));
       }},
      {"sub", [](auto& t, auto& ps) { return ad::sub(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {3, 4}));
       }},
      {"mul", [](auto& t, auto& ps) { return ad::mul(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {3, 4}));
       }},
      {"add_bias", [](auto& t, auto& ps) { return ad::add_bias(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {2, 3, 4}));
         ps.add("b", random_tensor(rng, {4}));
       }},
      {"mul_broadcast", [](auto& t, auto& ps) { return ad::mul_broadcast(P(t, ps, "a"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 4}));
         ps.add("b", random_tensor(rng, {4}));
       }},
      {"scale", [](auto& t, auto& ps) { return ad::scale(P(t, ps, "a"), -1.7); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"concat",
       [](auto& t, auto& ps) {
         const ad::Var parts[] = {P(t, ps, "a"), P(t, ps, "b"), P(t, ps, "a")};
         return ad::concat(parts);
       },
       [](auto& ps, auto& rng) {
         ps.add("a", random_tensor(rng, {3, 2}));
         ps.add("b", random_tensor(rng, {3, 5}));
       }},
      {"reshape", [](auto& t, auto& ps) { return ad::reshape(P(t, ps, "a"), {4, 3}); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"sin", [](auto& t, auto& ps) { return ad::sin(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4}, 2.0)); }},
      {"relu", [](auto& t, auto& ps) { return ad::relu(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"sum", [](auto& t, auto& ps) { return ad::sum(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"mean", [](auto& t, auto& ps) { return ad::mean(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"layer_norm", [](auto& t, auto& ps) { return ad::layer_norm(P(t, ps, "x"), P(t, ps, "g"), P(t, ps, "b")); },
       [](auto& ps, auto& rng) {
         ps.add("x", random_tensor(rng, {2, 5, 3}));
         ps.add("g", random_tensor(rng, {3}));
         ps.add("b", random_tensor(rng, {3}));
       }},
      {"layer_norm_masked",
       [](auto& t, auto& ps) { return ad::layer_norm(P(t, ps, "x"), P(t, ps, "g"), P(t, ps, "b"), &grid); },
       [](auto& ps, auto& rng) {
         ps.add("x", random_tensor(rng, {2, 7, 7, 3}));
         ps.add("g", random_tensor(rng, {3}));
         ps.add("b", random_tensor(rng, {3}));
       }},
      {"masked_conv2d",
       [](auto& t, auto& ps) { return ad::masked_conv2d(P(t, ps, "x"), P(t, ps, "w"), P(t, ps, "b"), filter, grid); },
       [](auto& ps, auto& rng) {
         ps.add("x", random_tensor(rng, {2, 7, 7, 2}));
         ps.add("w", random_tensor(rng, {3, 3, 3, 2}));
         ps.add("b", random_tensor(rng, {3}));
       }},
      {"gather_cells", [](auto& t, auto& ps) { return ad::gather_cells(P(t, ps, "x"), grid); },
       [](auto& ps, auto& rng) { ps.add("x", random_tensor(rng, {2, 7, 7, 2})); }},
      {"l2_normalize_rows", [](auto& t, auto& ps) { return ad::l2_normalize_rows(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4})); }},
      {"logsumexp_rows", [](auto& t, auto& ps) { return ad::logsumexp_rows(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {3, 4}, 3.0)); }},
      {"diagonal", [](auto& t, auto& ps) { return ad::diagonal(P(t, ps, "a")); },
       [](auto& ps, auto& rng) { ps.add("a", random_tensor(rng, {4, 4})); }},
  };
}

}  // namespace mvse::testing
