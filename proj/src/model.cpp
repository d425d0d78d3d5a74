// SPDX-License-Identifier: Apache-2.0
#include "uvcom/model.hpp"

#include <stdexcept>

namespace uvcom {

ForwardOut model_forward(ad::Tape& t, const ParamVars& pv,
                         const TrainConfig& cfg, const Mat& clips_raw,
                         const Mat& tokens_raw, bool with_heads) {
  const ModelDims& d = pv.dims;
  const int n_clips = static_cast<int>(clips_raw.rows());
  const int n_tokens = static_cast<int>(tokens_raw.rows());
  if (clips_raw.cols() != d.raw_dim || tokens_raw.cols() != d.raw_dim) {
    throw std::invalid_argument("model_forward: raw feature width mismatch");
  }
  if (n_tokens > d.tokens) {
    throw std::invalid_argument("model_forward: more tokens than positions");
  }
  const std::vector<int> clip_mask(static_cast<size_t>(n_clips), 1);
  const std::vector<int> token_mask(static_cast<size_t>(n_tokens), 1);

  ForwardOut out;

  // Embed both modalities: projection, position, modality type.
  ad::Var cp = project_clips(t, pv, t.constant(clips_raw));
  cp = ad::add(cp, t.constant(sinusoidal_positions(n_clips, d.hidden)));
  cp = ad::add_rowvec(cp, pv.type_clip);
  ad::Var tp = project_tokens(t, pv, t.constant(tokens_raw));
  tp = ad::add(tp, ad::slice_rows(pv.token_pos, 0, n_tokens));
  tp = ad::add_rowvec(tp, pv.type_token);

  FusedStreams fused = early_fuse(t, pv, cp, tp, clip_mask, token_mask);
  out.fused_clips = fused.clips;
  out.fused_tokens = fused.tokens;

  if (cfg.disable_dbia) {
    out.moments = fused.clips;
    out.phrases = fused.tokens;
  } else {
    out.moments = em_aggregate(t, fused.clips, pv.mu_v0, cfg.em_iterations,
                               cfg.lambda_rbf, &clip_mask);
    out.phrases = em_aggregate(t, fused.tokens, pv.mu_t0, cfg.em_iterations,
                               cfg.lambda_rbf, &token_mask);
  }

  ad::Var fv_conv = temporal_conv(t, pv, fused.clips, &clip_mask);
  if (cfg.disable_lrp) {
    out.fv_new = fv_conv;
  } else {
    ad::Var z = bmrw_affinity(t, fv_conv, out.phrases,
                              cfg.lambda_z_effective(), &clip_mask);
    out.fv_new = bmrw_closed_form(t, z, fv_conv, out.phrases, cfg.omega);
  }

  if (cfg.disable_gka) {
    out.local_clips = out.fv_new;
    out.global_token = ad::mean_rows(out.fv_new);
  } else {
    GkaOut g = gka_accumulate(t, pv, out.moments, out.phrases, out.fv_new,
                              clip_mask);
    out.global_token = g.global;
    out.local_clips = g.local;
    out.snippet = g.selected;
  }

  out.ft_sentence = ad::mean_rows(fused.tokens);
  if (with_heads) {
    out.heads = moment_decoder(t, pv, fused.tokens, out.local_clips,
                               clip_mask);
  }
  out.saliency = saliency_scores(t, pv, out.global_token, out.local_clips);
  return out;
}

}  // namespace uvcom
