// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/config.hpp"
#include "uvcom/rng.hpp"
#include "uvcom/span.hpp"

namespace uvcom {

using Mat = ad::Mat;

struct LossWeights {
  double lambda_giou = 1.0;
  double lambda_l1 = 10.0;
  double lambda_hd = 1.0;
  double lambda_hard = 1.0;
  double lambda_cta = 0.5;
  double lambda_vld = 0.5;
};

LossWeights weights_from_config(const TrainConfig& cfg);

/// Unweighted per-term values plus their weighted sum, as plain numbers for
/// logging.  `total` always equals the weighted sum of the terms.
struct LossReport {
  double l1 = 0.0;
  double giou = 0.0;
  double fg = 0.0;
  double margin = 0.0;
  double rank = 0.0;
  double hard = 0.0;
  double cta = 0.0;
  double vld = 0.0;
  double total = 0.0;

  LossReport& operator+=(const LossReport& o);
  LossReport& operator*=(double s);
};

/// Recomputes the weighted sum from the stored terms.
double weighted_total(const LossReport& r, const LossWeights& w);

struct SpanLosses {
  ad::Var l1;    ///< mean |dc| + |dw| over matched pairs
  ad::Var giou;  ///< mean (1 - giou) over matched pairs
  int matched = 0;
};

/// Localization losses over the matched (target, query) pairs; entries of
/// `q_for_gt` that are -1 are skipped.
SpanLosses span_losses(ad::Tape& t, ad::Var spans_cw,
                       const std::vector<int>& q_for_gt,
                       const std::vector<Span>& gts);

/// Per-query binary cross entropy from logits: matched queries toward 1,
/// the rest toward 0 at weight `bg_weight`; normalized by the weight sum.
ad::Var foreground_loss(ad::Tape& t, ad::Var fg_logits,
                        const std::vector<int>& q_for_gt, int num_queries,
                        double bg_weight);

struct DetectionLosses {
  ad::Var l1;
  ad::Var giou;
  ad::Var fg;
};

/// One prediction level end to end: match queries to targets on the current
/// values, then apply the span and foreground losses under that assignment.
/// Called once for the final decoder output and once per auxiliary level.
DetectionLosses detection_losses(ad::Tape& t, ad::Var spans_cw,
                                 ad::Var fg_logits,
                                 const std::vector<Span>& gts,
                                 const TrainConfig& cfg);

/// 1 for clips whose center falls inside some target span, else 0.
std::vector<int> moment_membership(const std::vector<Span>& gts,
                                   int num_clips);

/// Mean over sampled (inside, outside) clip pairs of
/// max(0, delta + score_out - score_in).  No valid pair yields zero.
ad::Var margin_loss(ad::Tape& t, ad::Var p_s,
                    const std::vector<int>& membership, double delta,
                    int pairs, Rng& rng);

/// Listwise contrast at every distinct quantized saliency level r:
/// -log( sum_{gt >= r} e^{s/tau} / sum_all e^{s/tau} ), averaged over levels
/// that split the clips; constant ground truth yields zero.
ad::Var rank_aware_loss(ad::Tape& t, ad::Var p_s,
                        const std::vector<double>& gt_saliency, double tau,
                        int levels);

/// Mean over clips of -log(1 - sigmoid(score)) for a video scored against a
/// query it does not match; equals softplus of the raw score.
ad::Var hard_negative_loss(ad::Tape& t, ad::Var p_s_hard);

/// Cross-entropy pulling text-relevant clips toward the sentence vector:
/// -sum_i log_softmax_over_clips(cos(clip_i, mean(tokens)))[i] * rel[i],
/// divided by the positive count; an all-zero mask yields zero.
ad::Var cta_loss(ad::Tape& t, ad::Var fv_new, ad::Var ft,
                 const std::vector<int>& relevance);

/// Symmetric InfoNCE over in-batch (video, sentence) pairs at temperature
/// tau; rows of both inputs are cosine-normalized inside.
ad::Var vld_loss(ad::Tape& t, ad::Var fvg_batch, ad::Var ft_batch,
                 double tau);

}  // namespace uvcom
