// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "mvse/autodiff.hpp"
#include "mvse/tensor.hpp"

namespace mvse {

/// Cosine similarity of every row of `a` [N,d] with every row of `b` [M,d].
/// Throws NumericError for a zero-norm row.
Tensor cosine_sim_matrix(const Tensor& a, const Tensor& b);

/// Symmetric InfoNCE over in-batch negatives:
///   1/(2N) sum_p [ -log softmax_row(S/tau)_pp - log softmax_col(S/tau)_pp ]
/// with S the cosine-similarity matrix and the diagonal as positives.
ad::Var contrastive_loss(ad::Var z_location, ad::Var z_views, double temperature);
double contrastive_loss(const Tensor& z_location, const Tensor& z_views, double temperature);

/// Fraction of rows i whose most similar view row is i itself. Ties go to
/// the lowest index.
double top1_retrieval(const Tensor& z_location, const Tensor& z_views);

}  // namespace mvse
