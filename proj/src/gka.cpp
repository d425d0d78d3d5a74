// SPDX-License-Identifier: Apache-2.0
#include "uvcom/gka.hpp"

#include <stdexcept>

#include "uvcom/encoder.hpp"

namespace uvcom {

using ad::Mat;
using ad::Var;

int select_snippet(const Mat& moments, const Mat& phrases) {
  if (moments.cols() != phrases.cols()) {
    throw std::invalid_argument("select_snippet: dimension mismatch");
  }
  int best = 0;
  double best_score = -2.0;
  for (int i = 0; i < moments.rows(); ++i) {
    const double mn = moments.row(i).norm();
    double score = -1.0;
    for (int k = 0; k < phrases.rows(); ++k) {
      const double pn = phrases.row(k).norm();
      const double denom = mn * pn;
      const double cosine =
          denom > 0.0 ? moments.row(i).dot(phrases.row(k)) / denom : 0.0;
      score = std::max(score, cosine);
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

GkaOut gka_accumulate(ad::Tape& t, const ParamVars& pv, Var moments,
                      Var phrases, Var fv_new,
                      const std::vector<int>& clip_mask) {
  const int L = fv_new.rows();
  if (static_cast<int>(clip_mask.size()) != L) {
    throw std::invalid_argument("gka_accumulate: mask length mismatch");
  }
  GkaOut out;
  out.selected = select_snippet(moments.val(), phrases.val());
  Var snippet = ad::gather_rows(moments, {out.selected});
  snippet = ad::add(snippet, pv.snippet_pos);

  Var x = ad::concat_rows({snippet, fv_new});
  std::vector<int> joint_mask;
  joint_mask.reserve(static_cast<size_t>(L) + 1);
  joint_mask.push_back(1);  // the summary slot is always visible
  joint_mask.insert(joint_mask.end(), clip_mask.begin(), clip_mask.end());
  const Mat bias = attention_bias(L + 1, joint_mask);
  for (const auto& layer : pv.gka) {
    x = encoder_layer(t, layer, x, bias, pv.dims.heads);
  }
  x = ad::layer_norm(x, pv.gka_ln_g, pv.gka_ln_b);
  out.global = ad::slice_rows(x, 0, 1);
  out.local = ad::slice_rows(x, 1, L);
  return out;
}

}  // namespace uvcom
