// SPDX-License-Identifier: Apache-2.0
#include "uvcom/heads.hpp"

#include <cmath>

#include "uvcom/encoder.hpp"

namespace uvcom {

using ad::Mat;
using ad::Var;

namespace {

Var linear(Var x, Var w, Var b) {
  return ad::add_rowvec(ad::matmul(x, w), b);
}

Var decoder_layer(ad::Tape& t, const DecoderLayerT<Var>& lp, Var x,
                  Var memory, const Mat& self_bias, const Mat& cross_bias,
                  int heads) {
  Var xn = ad::layer_norm(x, lp.ln1_g, lp.ln1_b);
  x = ad::add(x, multihead_attention(t, lp.self_attn, xn, xn, self_bias,
                                     heads));
  xn = ad::layer_norm(x, lp.ln2_g, lp.ln2_b);
  x = ad::add(x, multihead_attention(t, lp.cross_attn, xn, memory, cross_bias,
                                     heads));
  xn = ad::layer_norm(x, lp.ln3_g, lp.ln3_b);
  Var h = ad::relu(linear(xn, lp.w1, lp.b1));
  return ad::add(x, linear(h, lp.w2, lp.b2));
}

}  // namespace

HeadOut moment_decoder(ad::Tape& t, const ParamVars& pv, Var tokens_fused,
                       Var memory, const std::vector<int>& clip_mask) {
  const int n = tokens_fused.rows();
  Var q = linear(tokens_fused, pv.query_proj_w, pv.query_proj_b);

  const Mat self_bias = Mat::Zero(n, n);
  const Mat cross_bias = attention_bias(n, clip_mask);
  HeadOut out;
  const size_t layers = pv.decoder.size();
  for (size_t i = 0; i < layers; ++i) {
    q = decoder_layer(t, pv.decoder[i], q, memory, self_bias, cross_bias,
                      pv.dims.heads);
    if (i + 1 == layers) break;
    Var qn = ad::layer_norm(q, pv.decoder_ln_g, pv.decoder_ln_b);
    Var hn = ad::relu(linear(qn, pv.span_w1, pv.span_b1));
    out.aux_spans.push_back(ad::sigmoid(linear(hn, pv.span_w2, pv.span_b2)));
    out.aux_fg.push_back(linear(qn, pv.fg_w, pv.fg_b));
  }
  q = ad::layer_norm(q, pv.decoder_ln_g, pv.decoder_ln_b);

  Var h = ad::relu(linear(q, pv.span_w1, pv.span_b1));
  out.spans = ad::sigmoid(linear(h, pv.span_w2, pv.span_b2));
  out.fg_logits = linear(q, pv.fg_w, pv.fg_b);
  return out;
}

Var saliency_scores(ad::Tape& t, const ParamVars& pv, Var global, Var local) {
  Var g = ad::matmul(global, pv.sal_global_w);  // 1 x d
  Var l = ad::matmul(local, pv.sal_local_w);    // L x d
  const double inv = 1.0 / std::sqrt(static_cast<double>(g.cols()));
  return ad::scale(ad::matmul(l, ad::transpose(g)), inv);
}

}  // namespace uvcom
