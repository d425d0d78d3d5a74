// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/config.hpp"
#include "uvcom/rng.hpp"

namespace uvcom {

/// Shape information every forward pass needs alongside the weights.
struct ModelDims {
  int raw_dim = 0;      ///< corpus feature dimension
  int hidden = 0;       ///< model width D
  int tokens = 0;       ///< query length N (learned positions)
  int heads = 0;
  int fusion_layers = 0;
  int gka_layers = 0;
  int decoder_layers = 0;
  int n_v = 0;
  int n_t = 0;
  int conv_kernel = 0;
  int sal_dim = 0;

  bool operator==(const ModelDims&) const = default;
};

/// The same structure instantiated with Mat holds the weights and with
/// ad::Var holds their tape bindings, so the two can never diverge.
template <class T>
struct AttentionT {
  T wq, bq, wk, bk, wv, bv, wo, bo;
};

template <class T>
struct EncoderLayerT {
  T ln1_g, ln1_b;
  AttentionT<T> attn;
  T ln2_g, ln2_b, w1, b1, w2, b2;
};

template <class T>
struct DecoderLayerT {
  T ln1_g, ln1_b;
  AttentionT<T> self_attn;
  T ln2_g, ln2_b;
  AttentionT<T> cross_attn;
  T ln3_g, ln3_b, w1, b1, w2, b2;
};

template <class T>
struct ModelParamsT {
  ModelDims dims;

  // modality-specific input projections, each followed by a layer norm
  T proj_v_w, proj_v_b, proj_v_ln_g, proj_v_ln_b;
  T proj_t_w, proj_t_b, proj_t_ln_g, proj_t_ln_b;
  T type_clip, type_token;  // 1 x D modality embeddings
  T token_pos;              // N x D learned token positions

  std::vector<EncoderLayerT<T>> fusion;
  T fusion_ln_g, fusion_ln_b;  // closing norm of the pre-norm stack

  T mu_v0, mu_t0;  // learnable centroid initializations

  std::vector<T> conv_w;  // one D x D map per temporal tap
  T conv_b;

  T snippet_pos;  // 1 x D slot embedding for the selected snippet
  std::vector<EncoderLayerT<T>> gka;
  T gka_ln_g, gka_ln_b;

  T query_proj_w, query_proj_b;
  std::vector<DecoderLayerT<T>> decoder;
  T decoder_ln_g, decoder_ln_b;
  T span_w1, span_b1, span_w2, span_b2;
  T fg_w, fg_b;
  T sal_global_w, sal_local_w;
};

using Mat = ad::Mat;
using ModelParams = ModelParamsT<Mat>;
using ParamVars = ModelParamsT<ad::Var>;

namespace detail {

template <class T, class F>
void visit_attention(const std::string& p, AttentionT<T>& a, F&& f) {
  f(p + ".wq", a.wq);
  f(p + ".bq", a.bq);
  f(p + ".wk", a.wk);
  f(p + ".bk", a.bk);
  f(p + ".wv", a.wv);
  f(p + ".bv", a.bv);
  f(p + ".wo", a.wo);
  f(p + ".bo", a.bo);
}

template <class T, class F>
void visit_encoder_layer(const std::string& p, EncoderLayerT<T>& l, F&& f) {
  f(p + ".ln1.g", l.ln1_g);
  f(p + ".ln1.b", l.ln1_b);
  visit_attention(p + ".attn", l.attn, f);
  f(p + ".ln2.g", l.ln2_g);
  f(p + ".ln2.b", l.ln2_b);
  f(p + ".ffn.w1", l.w1);
  f(p + ".ffn.b1", l.b1);
  f(p + ".ffn.w2", l.w2);
  f(p + ".ffn.b2", l.b2);
}

template <class T, class F>
void visit_decoder_layer(const std::string& p, DecoderLayerT<T>& l, F&& f) {
  f(p + ".ln1.g", l.ln1_g);
  f(p + ".ln1.b", l.ln1_b);
  visit_attention(p + ".self", l.self_attn, f);
  f(p + ".ln2.g", l.ln2_g);
  f(p + ".ln2.b", l.ln2_b);
  visit_attention(p + ".cross", l.cross_attn, f);
  f(p + ".ln3.g", l.ln3_g);
  f(p + ".ln3.b", l.ln3_b);
  f(p + ".ffn.w1", l.w1);
  f(p + ".ffn.b1", l.b1);
  f(p + ".ffn.w2", l.w2);
  f(p + ".ffn.b2", l.b2);
}

}  // namespace detail

/// Visits every tensor with a stable dotted name.  Checkpointing, the
/// optimizer, binding and gradient collection all share this single listing.
template <class T, class F>
void visit_params(ModelParamsT<T>& p, F&& f) {
  f("proj_v.w", p.proj_v_w);
  f("proj_v.b", p.proj_v_b);
  f("proj_v.ln.g", p.proj_v_ln_g);
  f("proj_v.ln.b", p.proj_v_ln_b);
  f("proj_t.w", p.proj_t_w);
  f("proj_t.b", p.proj_t_b);
  f("proj_t.ln.g", p.proj_t_ln_g);
  f("proj_t.ln.b", p.proj_t_ln_b);
  f("type.clip", p.type_clip);
  f("type.token", p.type_token);
  f("token_pos", p.token_pos);
  for (size_t i = 0; i < p.fusion.size(); ++i) {
    detail::visit_encoder_layer("fusion." + std::to_string(i), p.fusion[i], f);
  }
  f("fusion.ln.g", p.fusion_ln_g);
  f("fusion.ln.b", p.fusion_ln_b);
  f("mu_v0", p.mu_v0);
  f("mu_t0", p.mu_t0);
  for (size_t i = 0; i < p.conv_w.size(); ++i) {
    f("conv.w" + std::to_string(i), p.conv_w[i]);
  }
  f("conv.b", p.conv_b);
  f("snippet_pos", p.snippet_pos);
  for (size_t i = 0; i < p.gka.size(); ++i) {
    detail::visit_encoder_layer("gka." + std::to_string(i), p.gka[i], f);
  }
  f("gka.ln.g", p.gka_ln_g);
  f("gka.ln.b", p.gka_ln_b);
  f("query_proj.w", p.query_proj_w);
  f("query_proj.b", p.query_proj_b);
  for (size_t i = 0; i < p.decoder.size(); ++i) {
    detail::visit_decoder_layer("decoder." + std::to_string(i), p.decoder[i],
                                f);
  }
  f("decoder.ln.g", p.decoder_ln_g);
  f("decoder.ln.b", p.decoder_ln_b);
  f("span.w1", p.span_w1);
  f("span.b1", p.span_b1);
  f("span.w2", p.span_w2);
  f("span.b2", p.span_b2);
  f("fg.w", p.fg_w);
  f("fg.b", p.fg_b);
  f("sal.global", p.sal_global_w);
  f("sal.local", p.sal_local_w);
}

/// Allocates the container layout for the given dims without touching values.
template <class T>
void shape_params(ModelParamsT<T>& p, const ModelDims& dims) {
  p.dims = dims;
  p.fusion.resize(static_cast<size_t>(dims.fusion_layers));
  p.conv_w.resize(static_cast<size_t>(dims.conv_kernel));
  p.gka.resize(static_cast<size_t>(dims.gka_layers));
  p.decoder.resize(static_cast<size_t>(dims.decoder_layers));
}

ModelDims dims_from_config(const TrainConfig& cfg, int raw_dim, int tokens);

/// Fresh weights for the given dims; identical (dims, rng seed) pairs
/// produce identical weights.
ModelParams init_params(const ModelDims& dims, Rng& rng);

/// Tape bindings: trainable binds leaves backed by `params` (whose storage
/// must outlive the tape); otherwise the weights are baked in as constants
/// and no gradient bookkeeping happens.
ParamVars bind_params(ad::Tape& tape, const ModelParams& params,
                      bool trainable);

/// Sum of gradients for every parameter tensor, keyed like visit_params.
void accumulate_grads(ad::Tape& tape, ParamVars& vars,
                      std::vector<Mat>& grads_out);

/// Flat pointer views used by the optimizer and checkpointing.
std::vector<std::pair<std::string, Mat*>> param_entries(ModelParams& params);
std::vector<std::pair<std::string, const Mat*>> param_entries(
    const ModelParams& params);
std::int64_t param_scalar_count(const ModelParams& params);

}  // namespace uvcom
