// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by tests.  These are
// written from the textbook definitions, on purpose sharing no code with
// the library, so agreement is meaningful.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Classic soft EM for an isotropic, equal-prior Gaussian mixture with
/// fixed variance sigma2 in every component.  Returns the means after
/// `iters` rounds from the given initialization.
inline Eigen::MatrixXd soft_em_isotropic(const Eigen::MatrixXd& points,
                                         Eigen::MatrixXd means, double sigma2,
                                         int iters) {
  const int n = static_cast<int>(points.rows());
  const int k = static_cast<int>(means.rows());
  for (int round = 0; round < iters; ++round) {
    Eigen::MatrixXd resp(n, k);
    for (int i = 0; i < n; ++i) {
      // Posterior over components for one point, computed in log space.
      std::vector<double> logp(static_cast<size_t>(k));
      double mx = -1e300;
      for (int c = 0; c < k; ++c) {
        const double d2 = (points.row(i) - means.row(c)).squaredNorm();
        logp[static_cast<size_t>(c)] = -d2 / (2.0 * sigma2);
        mx = std::max(mx, logp[static_cast<size_t>(c)]);
      }
      double z = 0.0;
      for (int c = 0; c < k; ++c) {
        z += std::exp(logp[static_cast<size_t>(c)] - mx);
      }
      for (int c = 0; c < k; ++c) {
        resp(i, c) = std::exp(logp[static_cast<size_t>(c)] - mx) / z;
      }
    }
    for (int c = 0; c < k; ++c) {
      const double mass = resp.col(c).sum();
      if (mass > 1e-12) {
        Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(points.cols());
        for (int i = 0; i < n; ++i) num += resp(i, c) * points.row(i);
        means.row(c) = num / mass;
      }
    }
  }
  return means;
}

/// Interval IoU straight from the definition.
inline double interval_iou(double s1, double e1, double s2, double e2) {
  const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  const double uni = (e1 - s1) + (e2 - s2) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Average precision over a ranked list of (start, end) predictions.
/// Predictions are given already ranked.  Each prediction greedily claims
/// the best-overlapping free ground truth; precision is accumulated at
/// every true-positive rank and divided by the ground-truth count.
inline double ranked_ap(const std::vector<std::pair<double, double>>& ranked,
                        const std::vector<std::pair<double, double>>& gts,
                        double thr) {
  std::vector<bool> used(gts.size(), false);
  double ap = 0.0;
  int hits = 0;
  for (size_t r = 0; r < ranked.size(); ++r) {
    double best = 0.0;
    int arg = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double iou = interval_iou(ranked[r].first, ranked[r].second,
                                      gts[g].first, gts[g].second);
      if (iou > best) {
        best = iou;
        arg = static_cast<int>(g);
      }
    }
    if (arg >= 0 && best >= thr) {
      used[static_cast<size_t>(arg)] = true;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return gts.empty() ? 0.0 : ap / static_cast<double>(gts.size());
}

/// Minimum assignment cost by trying every injective row-to-column map.
/// Exponential, fine for the tiny instances tests use.
inline double brute_force_assignment_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  std::vector<int> cols(static_cast<size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 1e300;
  // Permute all columns; the first n entries define the assignment.
  std::sort(cols.begin(), cols.end());
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, cols[static_cast<size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace oracle
