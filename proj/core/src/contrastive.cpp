// SPDX-License-Identifier: Apache-2.0
#include "mvse/contrastive.hpp"

#include "mvse/error.hpp"

namespace mvse {

Tensor cosine_sim_matrix(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) throw ShapeError("cosine_sim_matrix", a.shape(), b.shape());
  ad::Tape tape({.record_gradients = false, .trap_non_finite = true});
  auto na = ad::l2_normalize_rows(tape.constant(a));
  auto nb = ad::l2_normalize_rows(tape.constant(b));
  return ad::matmul_nt(na, nb).value();
}

ad::Var contrastive_loss(ad::Var z_location, ad::Var z_views, double temperature) {
  const auto& a = z_location.shape();
  const auto& b = z_views.shape();
  if (a.size() != 2 || a != b) throw ShapeError("contrastive_loss", a, b);
  if (a[0] == 0) throw InvalidArgument("contrastive_loss: empty batch");
  if (!(temperature > 0.0)) throw InvalidArgument("contrastive_loss: temperature must be positive");
  const double n = static_cast<double>(a[0]);

  auto logits = ad::scale(ad::matmul_nt(ad::l2_normalize_rows(z_location), ad::l2_normalize_rows(z_views)), 1.0 / temperature);
  auto rows = ad::sum(ad::logsumexp_rows(logits));
  auto cols = ad::sum(ad::logsumexp_rows(ad::transpose(logits)));
  auto positives = ad::scale(ad::sum(ad::diagonal(logits)), 2.0);
  return ad::scale(ad::sub(ad::add(rows, cols), positives), 1.0 / (2.0 * n));
}

double contrastive_loss(const Tensor& z_location, const Tensor& z_views, double temperature) {
  ad::Tape tape({.record_gradients = false, .trap_non_finite = true});
  return contrastive_loss(tape.constant(z_location), tape.constant(z_views), temperature).value().item();
}

double top1_retrieval(const Tensor& z_location, const Tensor& z_views) {
  const Tensor sim = cosine_sim_matrix(z_location, z_views);
  const std::size_t n = sim.dim(0);
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < sim.dim(1); ++j)
      if (sim.at(i, j) > sim.at(i, best)) best = j;
    hits += best == i ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace mvse
