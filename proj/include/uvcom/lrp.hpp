// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

/// Depth-mixing temporal convolution with a residual connection:
/// y_i = x_i + b + sum_k shift(x, k - half) W_k, zero-padded at the edges.
/// Masked rows are treated as zeros on the way in.
ad::Var temporal_conv(ad::Tape& t, const ParamVars& pv, ad::Var x,
                      const std::vector<int>* row_mask = nullptr);

/// Row-stochastic clip-to-phrase affinity: softmax over phrases of the
/// scaled inner products lambda_z * <clip_i, phrase_k>.  Masked clip rows
/// are zeroed after the softmax.
ad::Var bmrw_affinity(ad::Tape& t, ad::Var fv, ad::Var fp, double lambda_z,
                      const std::vector<int>* row_mask = nullptr);

/// One-step coupled update of the bidirectional modality random walk,
/// applied `steps` times:
///   fp <- omega * Norm1(Z)^T fv + (1 - omega) * fp0
///   fv <- omega * Z fp + (1 - omega) * fv0
/// Returns (fv, fp) after the final step.
std::pair<ad::Var, ad::Var> bmrw_iterate(ad::Tape& t, ad::Var z, ad::Var fv0,
                                         ad::Var fp0, double omega, int steps);

/// Fixed point of the walk in closed form:
///   (1 - omega) (I - omega^2 A)^{-1} (omega Z fp0 + fv0),  A = Z Norm1(Z)^T.
/// A is row-stochastic, so the system is invertible for omega in (0, 1).
ad::Var bmrw_closed_form(ad::Tape& t, ad::Var z, ad::Var fv0, ad::Var fp0,
                         double omega);

}  // namespace uvcom
