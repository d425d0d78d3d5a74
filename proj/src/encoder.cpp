// SPDX-License-Identifier: Apache-2.0
#include "uvcom/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace uvcom {

using ad::Var;

namespace {

constexpr double kMaskPenalty = -1e9;

Var linear(ad::Tape&, Var x, Var w, Var b) {
  return ad::add_rowvec(ad::matmul(x, w), b);
}

Var ffn(ad::Tape& t, const EncoderLayerT<Var>& lp, Var x) {
  Var h = ad::relu(linear(t, x, lp.w1, lp.b1));
  return linear(t, h, lp.w2, lp.b2);
}

}  // namespace

Mat attention_bias(int query_rows, const std::vector<int>& key_mask) {
  Mat bias = Mat::Zero(query_rows, static_cast<int>(key_mask.size()));
  for (size_t j = 0; j < key_mask.size(); ++j) {
    if (key_mask[j] == 0) {
      bias.col(static_cast<int>(j)).setConstant(kMaskPenalty);
    }
  }
  return bias;
}

Mat sinusoidal_positions(int length, int dim) {
  Mat pe = Mat::Zero(length, dim);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i + 1 < dim; i += 2) {
      const double angle =
          pos / std::pow(10000.0, static_cast<double>(i) / dim);
      pe(pos, i) = std::sin(angle);
      pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Var project_clips(ad::Tape& t, const ParamVars& pv, Var raw) {
  Var x = linear(t, raw, pv.proj_v_w, pv.proj_v_b);
  return ad::layer_norm(x, pv.proj_v_ln_g, pv.proj_v_ln_b);
}

Var project_tokens(ad::Tape& t, const ParamVars& pv, Var raw) {
  Var x = linear(t, raw, pv.proj_t_w, pv.proj_t_b);
  return ad::layer_norm(x, pv.proj_t_ln_g, pv.proj_t_ln_b);
}

Var multihead_attention(ad::Tape& t, const AttentionT<Var>& ap, Var q_in,
                        Var kv_in, const Mat& bias, int heads) {
  const int dim = q_in.cols();
  if (dim % heads != 0) {
    throw std::invalid_argument("multihead_attention: heads must divide dim");
  }
  const int dh = dim / heads;
  Var q = linear(t, q_in, ap.wq, ap.bq);
  Var k = linear(t, kv_in, ap.wk, ap.bk);
  Var v = linear(t, kv_in, ap.wv, ap.bv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Var> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(q, h * dh, dh);
    Var kh = ad::slice_cols(k, h * dh, dh);
    Var vh = ad::slice_cols(v, h * dh, dh);
    Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    Var probs = ad::row_softmax_bias(scores, bias);
    outs.push_back(ad::matmul(probs, vh));
  }
  Var merged = heads == 1 ? outs[0] : ad::concat_cols(outs);
  return linear(t, merged, ap.wo, ap.bo);
}

Var encoder_layer(ad::Tape& t, const EncoderLayerT<Var>& lp, Var x,
                  const Mat& self_bias, int heads) {
  Var xn = ad::layer_norm(x, lp.ln1_g, lp.ln1_b);
  x = ad::add(x, multihead_attention(t, lp.attn, xn, xn, self_bias, heads));
  Var xf = ad::layer_norm(x, lp.ln2_g, lp.ln2_b);
  return ad::add(x, ffn(t, lp, xf));
}

FusedStreams early_fuse(ad::Tape& t, const ParamVars& pv, Var clips,
                        Var tokens, const std::vector<int>& clip_mask,
                        const std::vector<int>& token_mask) {
  const int L = clips.rows();
  const int N = tokens.rows();
  if (static_cast<int>(clip_mask.size()) != L ||
      static_cast<int>(token_mask.size()) != N) {
    throw std::invalid_argument("early_fuse: mask length mismatch");
  }
  if (pv.fusion.empty()) return FusedStreams{clips, tokens};

  std::vector<int> joint_mask = clip_mask;
  joint_mask.insert(joint_mask.end(), token_mask.begin(), token_mask.end());
  const Mat bias = attention_bias(L + N, joint_mask);

  Var x = ad::concat_rows({clips, tokens});
  const int heads = pv.dims.heads;
  for (const auto& layer : pv.fusion) {
    x = encoder_layer(t, layer, x, bias, heads);
  }
  // Pre-norm stacks need a closing norm or the residual stream scale is
  // unbounded and downstream sigmoids saturate.
  x = ad::layer_norm(x, pv.fusion_ln_g, pv.fusion_ln_b);
  return FusedStreams{ad::slice_rows(x, 0, L), ad::slice_rows(x, L, N)};
}

}  // namespace uvcom
