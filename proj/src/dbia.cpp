// SPDX-License-Identifier: Apache-2.0
#include "uvcom/dbia.hpp"

#include <cmath>
#include <stdexcept>

namespace uvcom {

using ad::Mat;
using ad::Var;

double rbf_kernel(const Eigen::RowVectorXd& f, const Eigen::RowVectorXd& mu,
                  double lambda) {
  if (f.size() != mu.size()) {
    throw std::invalid_argument("rbf_kernel: dimension mismatch");
  }
  if (!f.allFinite() || !mu.allFinite() || !std::isfinite(lambda)) {
    throw std::domain_error("rbf_kernel: non-finite input");
  }
  return std::exp(-lambda * (f - mu).squaredNorm());
}

Var em_e_step(ad::Tape& t, Var f, Var mu, double lambda,
              const std::vector<int>* row_mask) {
  Var logits = ad::scale(ad::pairwise_sqdist(f, mu), -lambda);
  Var z = ad::row_softmax(logits);
  if (row_mask != nullptr) {
    if (static_cast<int>(row_mask->size()) != f.rows()) {
      throw std::invalid_argument("em_e_step: mask length mismatch");
    }
    Mat keep = Mat::Zero(f.rows(), mu.rows());
    for (int i = 0; i < f.rows(); ++i) {
      if ((*row_mask)[static_cast<size_t>(i)] != 0) keep.row(i).setOnes();
    }
    z = ad::cmul(z, keep);
  }
  return z;
}

Var em_m_step(ad::Tape& t, Var f, Var z, Var mu_prev) {
  (void)t;
  return ad::em_mstep(f, z, mu_prev);
}

Var em_aggregate(ad::Tape& t, Var f, Var mu0, int iterations, double lambda,
                 const std::vector<int>* row_mask) {
  if (iterations < 1) {
    throw std::invalid_argument("em_aggregate: iterations must be >= 1");
  }
  Var mu = mu0;
  for (int it = 0; it < iterations; ++it) {
    Var z = em_e_step(t, f, mu, lambda, row_mask);
    mu = em_m_step(t, f, z, mu);
  }
  return mu;
}

}  // namespace uvcom
