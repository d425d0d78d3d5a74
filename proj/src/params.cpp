// SPDX-License-Identifier: Apache-2.0
#include "uvcom/params.hpp"

#include <cmath>

namespace uvcom {

namespace {

Mat xavier(Rng& rng, int in_dim, int out_dim) {
  const double limit = std::sqrt(6.0 / (in_dim + out_dim));
  Mat m(in_dim, out_dim);
  for (int i = 0; i < in_dim; ++i) {
    for (int j = 0; j < out_dim; ++j) m(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

void init_attention(AttentionT<Mat>& a, int dim, Rng& rng) {
  a.wq = xavier(rng, dim, dim);
  a.bq = Mat::Zero(1, dim);
  a.wk = xavier(rng, dim, dim);
  a.bk = Mat::Zero(1, dim);
  a.wv = xavier(rng, dim, dim);
  a.bv = Mat::Zero(1, dim);
  a.wo = xavier(rng, dim, dim);
  a.bo = Mat::Zero(1, dim);
}

void init_encoder_layer(EncoderLayerT<Mat>& l, int dim, Rng& rng) {
  l.ln1_g = Mat::Ones(1, dim);
  l.ln1_b = Mat::Zero(1, dim);
  init_attention(l.attn, dim, rng);
  l.ln2_g = Mat::Ones(1, dim);
  l.ln2_b = Mat::Zero(1, dim);
  l.w1 = xavier(rng, dim, 4 * dim);
  l.b1 = Mat::Zero(1, 4 * dim);
  l.w2 = xavier(rng, 4 * dim, dim);
  l.b2 = Mat::Zero(1, dim);
}

void init_decoder_layer(DecoderLayerT<Mat>& l, int dim, Rng& rng) {
  l.ln1_g = Mat::Ones(1, dim);
  l.ln1_b = Mat::Zero(1, dim);
  init_attention(l.self_attn, dim, rng);
  l.ln2_g = Mat::Ones(1, dim);
  l.ln2_b = Mat::Zero(1, dim);
  init_attention(l.cross_attn, dim, rng);
  l.ln3_g = Mat::Ones(1, dim);
  l.ln3_b = Mat::Zero(1, dim);
  l.w1 = xavier(rng, dim, 4 * dim);
  l.b1 = Mat::Zero(1, 4 * dim);
  l.w2 = xavier(rng, 4 * dim, dim);
  l.b2 = Mat::Zero(1, dim);
}

}  // namespace

ModelDims dims_from_config(const TrainConfig& cfg, int raw_dim, int tokens) {
  ModelDims d;
  d.raw_dim = raw_dim;
  d.hidden = cfg.hidden_dim;
  d.tokens = tokens;
  d.heads = cfg.num_heads;
  d.fusion_layers = cfg.fusion_layers;
  d.gka_layers = cfg.gka_layers;
  d.decoder_layers = cfg.decoder_layers;
  d.n_v = cfg.n_v;
  d.n_t = cfg.n_t;
  d.conv_kernel = cfg.conv_kernel;
  d.sal_dim = cfg.sal_dim_effective();
  return d;
}

ModelParams init_params(const ModelDims& dims, Rng& rng) {
  ModelParams p;
  shape_params(p, dims);
  const int D = dims.hidden;

  p.proj_v_w = xavier(rng, dims.raw_dim, D);
  p.proj_v_b = Mat::Zero(1, D);
  p.proj_v_ln_g = Mat::Ones(1, D);
  p.proj_v_ln_b = Mat::Zero(1, D);
  p.proj_t_w = xavier(rng, dims.raw_dim, D);
  p.proj_t_b = Mat::Zero(1, D);
  p.proj_t_ln_g = Mat::Ones(1, D);
  p.proj_t_ln_b = Mat::Zero(1, D);
  p.type_clip = rng.normal_mat(1, D, 0.02);
  p.type_token = rng.normal_mat(1, D, 0.02);
  p.token_pos = rng.normal_mat(dims.tokens, D, 0.02);

  for (auto& layer : p.fusion) init_encoder_layer(layer, D, rng);
  p.fusion_ln_g = Mat::Ones(1, D);
  p.fusion_ln_b = Mat::Zero(1, D);

  const double mu_sd = 1.0 / std::sqrt(static_cast<double>(D));
  p.mu_v0 = rng.normal_mat(dims.n_v, D, mu_sd);
  p.mu_t0 = rng.normal_mat(dims.n_t, D, mu_sd);

  // Each tap is D x D; the effective fan-in spans the whole kernel.
  const double conv_limit =
      std::sqrt(6.0 / (D * dims.conv_kernel + D));
  for (auto& w : p.conv_w) {
    w = Mat(D, D);
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < D; ++j) w(i, j) = rng.uniform(-conv_limit, conv_limit);
    }
  }
  p.conv_b = Mat::Zero(1, D);

  p.snippet_pos = rng.normal_mat(1, D, 0.02);
  for (auto& layer : p.gka) init_encoder_layer(layer, D, rng);
  p.gka_ln_g = Mat::Ones(1, D);
  p.gka_ln_b = Mat::Zero(1, D);

  p.query_proj_w = xavier(rng, D, D);
  p.query_proj_b = Mat::Zero(1, D);
  for (auto& layer : p.decoder) init_decoder_layer(layer, D, rng);
  p.decoder_ln_g = Mat::Ones(1, D);
  p.decoder_ln_b = Mat::Zero(1, D);
  p.span_w1 = xavier(rng, D, D);
  p.span_b1 = Mat::Zero(1, D);
  p.span_w2 = xavier(rng, D, 2);
  p.span_b2 = Mat::Zero(1, 2);
  // Bias the width output toward a typical short moment instead of half
  // the sequence; centers keep the neutral 0.5 start.
  p.span_b2(0, 1) = -1.0;
  p.fg_w = xavier(rng, D, 1);
  p.fg_b = Mat::Zero(1, 1);
  p.sal_global_w = xavier(rng, D, dims.sal_dim);
  p.sal_local_w = xavier(rng, D, dims.sal_dim);
  return p;
}

ParamVars bind_params(ad::Tape& tape, const ModelParams& params,
                      bool trainable) {
  ParamVars pv;
  shape_params(pv, params.dims);
  std::vector<const Mat*> mats;
  visit_params(const_cast<ModelParams&>(params),
               [&](const std::string&, Mat& m) { mats.push_back(&m); });
  size_t i = 0;
  visit_params(pv, [&](const std::string&, ad::Var& v) {
    v = trainable ? tape.leaf(mats[i]) : tape.constant(*mats[i]);
    ++i;
  });
  return pv;
}

void accumulate_grads(ad::Tape& tape, ParamVars& vars,
                      std::vector<Mat>& grads_out) {
  const bool fill = grads_out.empty();
  size_t i = 0;
  visit_params(vars, [&](const std::string&, ad::Var& v) {
    if (fill) {
      grads_out.push_back(tape.grad(v));
    } else {
      if (i >= grads_out.size()) {
        throw std::logic_error("accumulate_grads: gradient buffer too small");
      }
      grads_out[i] += tape.grad(v);
    }
    ++i;
  });
}

std::vector<std::pair<std::string, Mat*>> param_entries(ModelParams& params) {
  std::vector<std::pair<std::string, Mat*>> out;
  visit_params(params,
               [&](const std::string& n, Mat& m) { out.emplace_back(n, &m); });
  return out;
}

std::vector<std::pair<std::string, const Mat*>> param_entries(
    const ModelParams& params) {
  std::vector<std::pair<std::string, const Mat*>> out;
  visit_params(const_cast<ModelParams&>(params),
               [&](const std::string& n, Mat& m) { out.emplace_back(n, &m); });
  return out;
}

std::int64_t param_scalar_count(const ModelParams& params) {
  std::int64_t total = 0;
  for (const auto& [name, mat] : param_entries(params)) {
    total += static_cast<std::int64_t>(mat->size());
  }
  return total;
}

}  // namespace uvcom
