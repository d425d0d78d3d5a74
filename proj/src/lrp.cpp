// SPDX-License-Identifier: Apache-2.0
#include "uvcom/lrp.hpp"

#include <stdexcept>

namespace uvcom {

using ad::Mat;
using ad::Var;

namespace {

void check_omega(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) {
    throw std::invalid_argument("bmrw: omega must lie in (0, 1)");
  }
}

Mat row_keep_mask(int rows, int cols, const std::vector<int>& mask) {
  Mat keep = Mat::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (mask[static_cast<size_t>(i)] != 0) keep.row(i).setOnes();
  }
  return keep;
}

}  // namespace

Var temporal_conv(ad::Tape& t, const ParamVars& pv, Var x,
                  const std::vector<int>* row_mask) {
  const int kernel = static_cast<int>(pv.conv_w.size());
  const int half = kernel / 2;
  Var xin = x;
  if (row_mask != nullptr) {
    if (static_cast<int>(row_mask->size()) != x.rows()) {
      throw std::invalid_argument("temporal_conv: mask length mismatch");
    }
    xin = ad::cmul(x, row_keep_mask(x.rows(), x.cols(), *row_mask));
  }
  Var acc = xin;  // residual
  for (int k = 0; k < kernel; ++k) {
    Var shifted = k == half ? xin : ad::time_shift(xin, k - half);
    acc = ad::add(acc, ad::matmul(shifted, pv.conv_w[static_cast<size_t>(k)]));
  }
  return ad::add_rowvec(acc, pv.conv_b);
}

Var bmrw_affinity(ad::Tape& t, Var fv, Var fp, double lambda_z,
                  const std::vector<int>* row_mask) {
  if (fv.cols() != fp.cols()) {
    throw std::invalid_argument("bmrw_affinity: feature dim mismatch");
  }
  Var logits = ad::scale(ad::matmul(fv, ad::transpose(fp)), lambda_z);
  Var z = ad::row_softmax(logits);
  if (row_mask != nullptr) {
    if (static_cast<int>(row_mask->size()) != fv.rows()) {
      throw std::invalid_argument("bmrw_affinity: mask length mismatch");
    }
    z = ad::cmul(z, row_keep_mask(fv.rows(), fp.rows(), *row_mask));
  }
  return z;
}

std::pair<Var, Var> bmrw_iterate(ad::Tape& t, Var z, Var fv0, Var fp0,
                                 double omega, int steps) {
  check_omega(omega);
  if (steps < 1) throw std::invalid_argument("bmrw_iterate: steps must be >= 1");
  Var znorm_t = ad::transpose(ad::col_normalize(z));
  Var fv = fv0;
  Var fp = fp0;
  for (int s = 0; s < steps; ++s) {
    fp = ad::add(ad::scale(ad::matmul(znorm_t, fv), omega),
                 ad::scale(fp0, 1.0 - omega));
    fv = ad::add(ad::scale(ad::matmul(z, fp), omega),
                 ad::scale(fv0, 1.0 - omega));
  }
  return {fv, fp};
}

Var bmrw_closed_form(ad::Tape& t, Var z, Var fv0, Var fp0, double omega) {
  check_omega(omega);
  const int L = fv0.rows();
  Var a = ad::matmul(z, ad::transpose(ad::col_normalize(z)));
  // I - omega^2 A is strictly diagonally dominant in the row-sum sense
  // because A is row-stochastic, hence invertible.
  Var system =
      ad::add(t.constant(Mat::Identity(L, L)), ad::scale(a, -omega * omega));
  Var rhs = ad::add(ad::scale(ad::matmul(z, fp0), omega), fv0);
  return ad::scale(ad::solve_lu(system, rhs), 1.0 - omega);
}

}  // namespace uvcom
