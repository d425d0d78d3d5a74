// SPDX-License-Identifier: Apache-2.0
#include "uvcom/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "uvcom/matcher.hpp"

namespace uvcom {

LossWeights weights_from_config(const TrainConfig& cfg) {
  LossWeights w;
  w.lambda_giou = cfg.lambda_giou;
  w.lambda_l1 = cfg.lambda_l1;
  w.lambda_hd = cfg.lambda_hd;
  w.lambda_hard = cfg.lambda_hard;
  w.lambda_cta = cfg.lambda_cta;
  w.lambda_vld = cfg.lambda_vld;
  return w;
}

LossReport& LossReport::operator+=(const LossReport& o) {
  l1 += o.l1;
  giou += o.giou;
  fg += o.fg;
  margin += o.margin;
  rank += o.rank;
  hard += o.hard;
  cta += o.cta;
  vld += o.vld;
  total += o.total;
  return *this;
}

LossReport& LossReport::operator*=(double s) {
  l1 *= s;
  giou *= s;
  fg *= s;
  margin *= s;
  rank *= s;
  hard *= s;
  cta *= s;
  vld *= s;
  total *= s;
  return *this;
}

double weighted_total(const LossReport& r, const LossWeights& w) {
  return w.lambda_hd * (r.margin + r.rank) + w.lambda_l1 * r.l1 +
         w.lambda_giou * r.giou + r.fg + w.lambda_hard * r.hard +
         w.lambda_cta * r.cta + w.lambda_vld * r.vld;
}

SpanLosses span_losses(ad::Tape& t, ad::Var spans_cw,
                       const std::vector<int>& q_for_gt,
                       const std::vector<Span>& gts) {
  std::vector<int> q_idx;
  std::vector<const Span*> matched_gt;
  for (size_t g = 0; g < q_for_gt.size(); ++g) {
    if (q_for_gt[g] < 0) continue;
    q_idx.push_back(q_for_gt[g]);
    matched_gt.push_back(&gts[g]);
  }
  const int m = static_cast<int>(q_idx.size());
  if (m == 0) {
    SpanLosses out{t.constant(Mat::Zero(1, 1)), t.constant(Mat::Zero(1, 1)),
                   0};
    return out;
  }

  ad::Var pred = ad::gather_rows(spans_cw, q_idx);
  ad::Var c = ad::slice_cols(pred, 0, 1);
  ad::Var w = ad::slice_cols(pred, 1, 1);
  // Guard against degenerate widths so the giou ratios stay defined.
  w = ad::emax(w, t.constant(Mat::Constant(m, 1, 1e-6)));

  Mat gc(m, 1), gw(m, 1), gs(m, 1), ge(m, 1);
  for (int i = 0; i < m; ++i) {
    const Span& s = *matched_gt[static_cast<size_t>(i)];
    const Interval iv = to_interval(s);
    gc(i, 0) = s.center;
    gw(i, 0) = std::max(s.width, 1e-6);
    gs(i, 0) = iv.start;
    ge(i, 0) = iv.end;
  }

  ad::Var l1 = ad::mean_all(
      ad::add(ad::abs_val(ad::sub(c, t.constant(gc))),
              ad::abs_val(ad::sub(w, t.constant(gw)))));

  ad::Var half_w = ad::scale(w, 0.5);
  ad::Var s = ad::sub(c, half_w);
  ad::Var e = ad::add(c, half_w);
  ad::Var gs_v = t.constant(gs);
  ad::Var ge_v = t.constant(ge);
  ad::Var inter = ad::emax(t.constant(Mat::Zero(m, 1)),
                           ad::sub(ad::emin(e, ge_v), ad::emax(s, gs_v)));
  ad::Var uni = ad::sub(ad::add(w, t.constant(gw)), inter);
  ad::Var hull = ad::sub(ad::emax(e, ge_v), ad::emin(s, gs_v));
  ad::Var giou =
      ad::sub(ad::divide(inter, uni), ad::divide(ad::sub(hull, uni), hull));
  ad::Var giou_loss = ad::mean_all(ad::add_scalar(ad::neg(giou), 1.0));

  return SpanLosses{l1, giou_loss, m};
}

ad::Var foreground_loss(ad::Tape& t, ad::Var fg_logits,
                        const std::vector<int>& q_for_gt, int num_queries,
                        double bg_weight) {
  Mat targets = Mat::Zero(num_queries, 1);
  Mat weights = Mat::Constant(num_queries, 1, bg_weight);
  for (int q : q_for_gt) {
    if (q < 0) continue;
    targets(q, 0) = 1.0;
    weights(q, 0) = 1.0;
  }
  weights /= weights.sum();
  // log-loss from logits: softplus(x) - target * x.
  ad::Var bce =
      ad::sub(ad::softplus(fg_logits), ad::cmul(fg_logits, targets));
  return ad::dot_const(bce, weights);
}

DetectionLosses detection_losses(ad::Tape& t, ad::Var spans_cw,
                                 ad::Var fg_logits,
                                 const std::vector<Span>& gts,
                                 const TrainConfig& cfg) {
  const Mat spans_val = spans_cw.val();
  const Mat logits_val = fg_logits.val();
  Eigen::VectorXd fg_probs(logits_val.rows());
  for (int i = 0; i < logits_val.rows(); ++i) {
    const double x = logits_val(i, 0);
    fg_probs(i) = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  const std::vector<int> q_for_gt = match_moments(
      spans_val, fg_probs, gts, cfg.lambda_l1, cfg.lambda_giou);

  DetectionLosses out;
  SpanLosses sl = span_losses(t, spans_cw, q_for_gt, gts);
  out.l1 = sl.l1;
  out.giou = sl.giou;
  out.fg = foreground_loss(t, fg_logits, q_for_gt,
                           static_cast<int>(spans_val.rows()),
                           cfg.bg_weight);
  return out;
}

std::vector<int> moment_membership(const std::vector<Span>& gts,
                                   int num_clips) {
  std::vector<int> inside(static_cast<size_t>(num_clips), 0);
  for (int i = 0; i < num_clips; ++i) {
    const double center = (i + 0.5) / num_clips;
    for (const Span& s : gts) {
      const Interval iv = to_interval(s);
      if (center >= iv.start && center <= iv.end) {
        inside[static_cast<size_t>(i)] = 1;
        break;
      }
    }
  }
  return inside;
}

ad::Var margin_loss(ad::Tape& t, ad::Var p_s,
                    const std::vector<int>& membership, double delta,
                    int pairs, Rng& rng) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < membership.size(); ++i) {
    (membership[i] != 0 ? pos : neg).push_back(static_cast<int>(i));
  }
  if (pos.empty() || neg.empty() || pairs <= 0) {
    return t.constant(Mat::Zero(1, 1));
  }
  std::vector<int> hi, lo;
  hi.reserve(static_cast<size_t>(pairs));
  lo.reserve(static_cast<size_t>(pairs));
  for (int k = 0; k < pairs; ++k) {
    hi.push_back(pos[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(pos.size()) - 1))]);
    lo.push_back(neg[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(neg.size()) - 1))]);
  }
  ad::Var s_hi = ad::gather_rows(p_s, hi);
  ad::Var s_lo = ad::gather_rows(p_s, lo);
  ad::Var gap = ad::add_scalar(ad::sub(s_lo, s_hi), delta);
  return ad::mean_all(
      ad::emax(t.constant(Mat::Zero(pairs, 1)), gap));
}

ad::Var rank_aware_loss(ad::Tape& t, ad::Var p_s,
                        const std::vector<double>& gt_saliency, double tau,
                        int levels) {
  const int n = static_cast<int>(gt_saliency.size());
  std::vector<double> q(static_cast<size_t>(n));
  std::set<double> grid;
  for (int i = 0; i < n; ++i) {
    q[static_cast<size_t>(i)] =
        std::round(gt_saliency[static_cast<size_t>(i)] * (levels - 1)) /
        (levels - 1);
    grid.insert(q[static_cast<size_t>(i)]);
  }

  ad::Var s_row = ad::transpose(ad::scale(p_s, 1.0 / tau));
  ad::Var lse_all = ad::row_logsumexp(s_row);
  std::vector<ad::Var> terms;
  for (double r : grid) {
    Mat pos_mask = Mat::Zero(1, n);
    int n_pos = 0;
    for (int i = 0; i < n; ++i) {
      if (q[static_cast<size_t>(i)] >= r - 1e-12) {
        pos_mask(0, i) = 1.0;
        ++n_pos;
      }
    }
    if (n_pos == 0 || n_pos == n) continue;
    ad::Var lse_pos = ad::logsumexp_masked(s_row, pos_mask);
    terms.push_back(ad::sub(lse_all, lse_pos));
  }
  if (terms.empty()) return t.constant(Mat::Zero(1, 1));
  ad::Var sum = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) sum = ad::add(sum, terms[i]);
  return ad::scale(sum, 1.0 / static_cast<double>(terms.size()));
}

ad::Var hard_negative_loss(ad::Tape& t, ad::Var p_s_hard) {
  (void)t;
  // -log(1 - sigmoid(x)) == softplus(x).
  return ad::mean_all(ad::softplus(p_s_hard));
}

ad::Var cta_loss(ad::Tape& t, ad::Var fv_new, ad::Var ft,
                 const std::vector<int>& relevance) {
  const int n = fv_new.rows();
  Mat rel = Mat::Zero(1, n);
  int n_pos = 0;
  for (int i = 0; i < n && i < static_cast<int>(relevance.size()); ++i) {
    if (relevance[static_cast<size_t>(i)] != 0) {
      rel(0, i) = 1.0;
      ++n_pos;
    }
  }
  if (n_pos == 0) return t.constant(Mat::Zero(1, 1));

  ad::Var sentence = ad::l2_normalize_rows(ad::mean_rows(ft));
  ad::Var clips = ad::l2_normalize_rows(fv_new);
  ad::Var sims = ad::transpose(ad::matmul(clips, ad::transpose(sentence)));
  ad::Var logp = ad::row_log_softmax(sims);
  return ad::scale(ad::neg(ad::dot_const(logp, rel)), 1.0 / n_pos);
}

ad::Var vld_loss(ad::Tape& t, ad::Var fvg_batch, ad::Var ft_batch,
                 double tau) {
  const int b = fvg_batch.rows();
  ad::Var v = ad::l2_normalize_rows(fvg_batch);
  ad::Var s = ad::l2_normalize_rows(ft_batch);
  ad::Var sim = ad::scale(ad::matmul(v, ad::transpose(s)), 1.0 / tau);
  ad::Var lse_rows = ad::sum_all(ad::row_logsumexp(sim));
  ad::Var lse_cols = ad::sum_all(ad::row_logsumexp(ad::transpose(sim)));
  ad::Var diag = ad::dot_const(
      sim, Mat::Identity(b, b));
  ad::Var two_dir = ad::sub(ad::add(lse_rows, lse_cols), ad::scale(diag, 2.0));
  return ad::scale(two_dir, 1.0 / (2.0 * b));
}

}  // namespace uvcom
