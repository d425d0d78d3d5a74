// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

struct HeadOut {
  ad::Var spans;      ///< N x 2 sigmoided (center, width)
  ad::Var fg_logits;  ///< N x 1 foreground scores, pre-sigmoid
  // Predictions read off every intermediate decoder layer through the same
  // norm and heads.  Training supervises each level; inference ignores them.
  std::vector<ad::Var> aux_spans;
  std::vector<ad::Var> aux_fg;
};

/// Set-prediction decoder: one query per fused text token, self-attention
/// among queries and cross-attention into the clip-level memory.  A small
/// MLP regresses (center, width) through a sigmoid; a linear head scores
/// whether the query corresponds to a real moment.
HeadOut moment_decoder(ad::Tape& t, const ParamVars& pv, ad::Var tokens_fused,
                       ad::Var memory, const std::vector<int>& clip_mask);

/// Bilinear clip saliency: <w_g global, w_l local_i> / sqrt(sal_dim), L x 1.
ad::Var saliency_scores(ad::Tape& t, const ParamVars& pv, ad::Var global,
                        ad::Var local);

}  // namespace uvcom
