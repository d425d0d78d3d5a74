// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "uvcom/span.hpp"

namespace uvcom {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// via the potentials/augmenting-path method in O(rows^2 * cols).
/// Returns the column chosen for each row.
std::vector<int> hungarian_assign(const Eigen::MatrixXd& cost);

/// Pairing cost between a predicted span and a ground-truth span:
/// lambda_l1 * |cw - cw_gt|_1 + lambda_giou * (1 - giou) - fg_prob.
double pair_cost(const Span& pred, double fg_prob, const Span& gt,
                 double lambda_l1, double lambda_giou);

/// Optimal one-to-one assignment of ground-truth moments to predicted
/// queries; entry g is the query index for ground truth g.  Evaluated on
/// plain values, outside any gradient bookkeeping.
std::vector<int> match_moments(const Eigen::MatrixXd& spans_cw,
                               const Eigen::VectorXd& fg_probs,
                               const std::vector<Span>& gts, double lambda_l1,
                               double lambda_giou);

}  // namespace uvcom
