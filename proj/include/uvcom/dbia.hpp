// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "uvcom/autodiff.hpp"

namespace uvcom {

/// Gaussian affinity exp(-lambda * ||f - mu||^2), in (0, 1] for finite input.
double rbf_kernel(const Eigen::RowVectorXd& f, const Eigen::RowVectorXd& mu,
                  double lambda);

/// Soft assignment of rows of `f` to centroids `mu`: row-softmax of
/// -lambda * squared distances.  Rows listed as 0 in `row_mask` (when given)
/// are zeroed so they carry no responsibility mass.
ad::Var em_e_step(ad::Tape& t, ad::Var f, ad::Var mu, double lambda,
                  const std::vector<int>* row_mask = nullptr);

/// Responsibility-weighted centroid update; empty clusters keep their
/// previous position.
ad::Var em_m_step(ad::Tape& t, ad::Var f, ad::Var z, ad::Var mu_prev);

/// Alternates e/m steps from the learned initialization and returns the
/// final centroids (the aggregated moment or phrase representations).
ad::Var em_aggregate(ad::Tape& t, ad::Var f, ad::Var mu0, int iterations,
                     double lambda,
                     const std::vector<int>* row_mask = nullptr);

}  // namespace uvcom
