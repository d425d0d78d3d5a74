// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

/// Additive attention bias with -1e9 wherever the key is invalid.
/// `key_mask[j] != 0` marks key j as usable; `query_rows` sets the height.
Mat attention_bias(int query_rows, const std::vector<int>& key_mask);

/// Classic fixed sine/cosine position table, length x dim.
Mat sinusoidal_positions(int length, int dim);

/// Linear projection plus layer norm bringing raw features to model width.
ad::Var project_clips(ad::Tape& t, const ParamVars& pv, ad::Var raw);
ad::Var project_tokens(ad::Tape& t, const ParamVars& pv, ad::Var raw);

/// Scaled dot-product multi-head attention; q_in attends into kv_in.
/// `bias` is rows(q_in) x rows(kv_in), added to the logits before softmax.
ad::Var multihead_attention(ad::Tape& t, const AttentionT<ad::Var>& ap,
                            ad::Var q_in, ad::Var kv_in, const Mat& bias,
                            int heads);

/// Pre-norm transformer encoder layer (self-attention + ReLU FFN).
ad::Var encoder_layer(ad::Tape& t, const EncoderLayerT<ad::Var>& lp, ad::Var x,
                      const Mat& self_bias, int heads);

struct FusedStreams {
  ad::Var clips;   ///< L x D
  ad::Var tokens;  ///< N x D
};

/// Joint bidirectional encoding of the concatenated clip+token sequence.
/// Both modalities attend to each other in every layer; masked positions are
/// invisible as keys.  Zero layers returns the inputs untouched.
FusedStreams early_fuse(ad::Tape& t, const ParamVars& pv, ad::Var clips,
                        ad::Var tokens, const std::vector<int>& clip_mask,
                        const std::vector<int>& token_mask);

}  // namespace uvcom
