// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "uvcom/autodiff.hpp"
#include "uvcom/config.hpp"
#include "uvcom/dbia.hpp"
#include "uvcom/encoder.hpp"
#include "uvcom/gka.hpp"
#include "uvcom/heads.hpp"
#include "uvcom/lrp.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

/// Everything one video-text pair produces on the tape.  Handles stay valid
/// for the lifetime of the tape they were built on.
struct ForwardOut {
  ad::Var fused_clips;   ///< L x D after joint encoding
  ad::Var fused_tokens;  ///< N x D
  ad::Var moments;       ///< aggregated video branch (n_v x D, or L x D raw)
  ad::Var phrases;       ///< aggregated text branch (n_t x D, or N x D raw)
  ad::Var fv_new;        ///< L x D propagated clip stream
  ad::Var global_token;  ///< 1 x D video-level summary
  ad::Var local_clips;   ///< L x D clip-level stream feeding the heads
  ad::Var ft_sentence;   ///< 1 x D mean of fused tokens
  HeadOut heads;         ///< spans + foreground logits (when requested)
  ad::Var saliency;      ///< L x 1 raw scores
  int snippet = -1;      ///< index chosen by the accumulation stage
};

/// Full pass from raw features to predictions.  The ablation switches on
/// `cfg` bypass individual stages: aggregation off feeds the raw fused
/// streams forward, propagation off keeps the convolved stream, and
/// accumulation off substitutes the masked clip mean for the global token.
/// `with_heads=false` skips the span decoder (used when a video is scored
/// against a query it does not match, where only saliency is needed).
ForwardOut model_forward(ad::Tape& t, const ParamVars& pv,
                         const TrainConfig& cfg, const Mat& clips_raw,
                         const Mat& tokens_raw, bool with_heads = true);

}  // namespace uvcom
