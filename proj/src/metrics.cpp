// SPDX-License-Identifier: Apache-2.0
#include "uvcom/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace uvcom {

std::vector<int> rank_by_score(const std::vector<ScoredSpan>& preds) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<size_t>(a)].score >
           preds[static_cast<size_t>(b)].score;
  });
  return order;
}

double span_average_precision(const std::vector<ScoredSpan>& preds,
                              const std::vector<Span>& gts,
                              double iou_threshold) {
  if (gts.empty()) {
    throw std::invalid_argument("span_average_precision: no ground truth");
  }
  if (preds.empty()) return 0.0;

  const std::vector<int> order = rank_by_score(preds);
  std::vector<char> taken(gts.size(), 0);
  double ap = 0.0;
  int tp = 0;
  int seen = 0;
  for (int idx : order) {
    ++seen;
    const Span& p = preds[static_cast<size_t>(idx)].span;
    int best_gt = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = temporal_iou(p, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_threshold) {
      taken[static_cast<size_t>(best_gt)] = 1;
      ++tp;
      ap += static_cast<double>(tp) / seen;
    }
  }
  return ap / static_cast<double>(gts.size());
}

namespace {

/// Clip indices by descending predicted saliency, ties toward lower index.
std::vector<int> rank_clips(const std::vector<double>& pred) {
  std::vector<int> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pred[static_cast<size_t>(a)] > pred[static_cast<size_t>(b)];
  });
  return order;
}

}  // namespace

double saliency_average_precision(const std::vector<double>& pred,
                                  const std::vector<double>& gt,
                                  double good_threshold) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("saliency_average_precision: length mismatch");
  }
  int positives = 0;
  for (double g : gt) {
    if (g >= good_threshold) ++positives;
  }
  if (positives == 0) return 0.0;

  const std::vector<int> order = rank_clips(pred);
  double ap = 0.0;
  int tp = 0;
  int seen = 0;
  for (int idx : order) {
    ++seen;
    if (gt[static_cast<size_t>(idx)] >= good_threshold) {
      ++tp;
      ap += static_cast<double>(tp) / seen;
    }
  }
  return ap / positives;
}

bool saliency_hit_at_1(const std::vector<double>& pred,
                       const std::vector<double>& gt, double good_threshold) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("saliency_hit_at_1: length mismatch");
  }
  int best = 0;
  for (size_t i = 1; i < pred.size(); ++i) {
    if (pred[i] > pred[static_cast<size_t>(best)]) best = static_cast<int>(i);
  }
  return gt[static_cast<size_t>(best)] >= good_threshold;
}

MetricsReport compute_metrics(const std::vector<VideoEval>& videos,
                              double good_threshold) {
  MetricsReport r;
  r.num_videos = static_cast<int>(videos.size());
  if (videos.empty()) return r;

  for (const VideoEval& v : videos) {
    // Recall@1: does the single top-ranked span reach the IoU bar against
    // any ground truth?
    double top_iou = 0.0;
    if (!v.predictions.empty()) {
      const int top = rank_by_score(v.predictions)[0];
      for (const Span& g : v.gt_spans) {
        top_iou = std::max(
            top_iou, temporal_iou(v.predictions[static_cast<size_t>(top)].span,
                                  g));
      }
    }
    r.r1_at_05 += top_iou >= 0.5 ? 1.0 : 0.0;
    r.r1_at_07 += top_iou >= 0.7 ? 1.0 : 0.0;

    r.map_at_05 += span_average_precision(v.predictions, v.gt_spans, 0.5);
    r.map_at_075 += span_average_precision(v.predictions, v.gt_spans, 0.75);
    double avg = 0.0;
    for (int k = 0; k < 10; ++k) {
      avg += span_average_precision(v.predictions, v.gt_spans,
                                    0.5 + 0.05 * k);
    }
    r.map_avg += avg / 10.0;

    if (!v.pred_saliency.empty()) {
      r.hd_map += saliency_average_precision(v.pred_saliency, v.gt_saliency,
                                             good_threshold);
      r.hit_at_1 += saliency_hit_at_1(v.pred_saliency, v.gt_saliency,
                                      good_threshold)
                        ? 1.0
                        : 0.0;
    }
  }

  const double n = static_cast<double>(videos.size());
  r.r1_at_05 /= n;
  r.r1_at_07 /= n;
  r.map_at_05 /= n;
  r.map_at_075 /= n;
  r.map_avg /= n;
  r.hd_map /= n;
  r.hit_at_1 /= n;
  return r;
}

}  // namespace uvcom
