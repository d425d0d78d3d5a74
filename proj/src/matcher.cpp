// SPDX-License-Identifier: Apache-2.0
#include "uvcom/matcher.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace uvcom {

std::vector<int> hungarian_assign(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0) return {};
  if (n > m) {
    throw std::invalid_argument("hungarian_assign: more rows than columns");
  }
  if (!cost.allFinite()) {
    throw std::invalid_argument("hungarian_assign: non-finite cost");
  }
  const double inf = std::numeric_limits<double>::infinity();

  // 1-indexed potentials over rows (u) and columns (v); p[j] is the row
  // currently assigned to column j, with column 0 as the staging slot.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<size_t>(m) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<size_t>(j)] != 0) {
      row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
    }
  }
  return row_to_col;
}

double pair_cost(const Span& pred, double fg_prob, const Span& gt,
                 double lambda_l1, double lambda_giou) {
  const double l1 =
      std::abs(pred.center - gt.center) + std::abs(pred.width - gt.width);
  return lambda_l1 * l1 + lambda_giou * (1.0 - temporal_giou(pred, gt)) -
         fg_prob;
}

std::vector<int> match_moments(const Eigen::MatrixXd& spans_cw,
                               const Eigen::VectorXd& fg_probs,
                               const std::vector<Span>& gts, double lambda_l1,
                               double lambda_giou) {
  const int q = static_cast<int>(spans_cw.rows());
  const int g = static_cast<int>(gts.size());
  Eigen::MatrixXd cost(g, q);
  for (int gi = 0; gi < g; ++gi) {
    for (int qi = 0; qi < q; ++qi) {
      cost(gi, qi) =
          pair_cost(Span{spans_cw(qi, 0), spans_cw(qi, 1)}, fg_probs(qi),
                    gts[static_cast<size_t>(gi)], lambda_l1, lambda_giou);
    }
  }
  if (g <= q) return hungarian_assign(cost);
  // More targets than queries: assign every query instead and leave the
  // leftover targets unmatched (-1).
  const std::vector<int> g_for_q = hungarian_assign(cost.transpose());
  std::vector<int> q_for_g(static_cast<size_t>(g), -1);
  for (int qi = 0; qi < q; ++qi) {
    q_for_g[static_cast<size_t>(g_for_q[static_cast<size_t>(qi)])] = qi;
  }
  return q_for_g;
}

}  // namespace uvcom
