// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uvcom/span.hpp"

namespace uvcom {

/// One scored span prediction; videos rank these by descending score.
struct ScoredSpan {
  Span span;
  double score = 0.0;
};

/// Everything needed to evaluate one video.
struct VideoEval {
  std::string video_id;
  std::vector<ScoredSpan> predictions;   ///< any order; ranked internally
  std::vector<Span> gt_spans;
  std::vector<double> pred_saliency;     ///< per clip
  std::vector<double> gt_saliency;       ///< per clip, video max is 1
};

struct MetricsReport {
  double r1_at_05 = 0.0;
  double r1_at_07 = 0.0;
  double map_at_05 = 0.0;
  double map_at_075 = 0.0;
  double map_avg = 0.0;   ///< mean over IoU thresholds 0.5:0.05:0.95
  double hd_map = 0.0;
  double hit_at_1 = 0.0;
  int num_videos = 0;
};

/// Stable ranking: descending score, ties keep the original order.
std::vector<int> rank_by_score(const std::vector<ScoredSpan>& preds);

/// Average precision of a ranked span list against a ground-truth set:
/// walk the ranking, greedily matching each prediction to the not-yet-taken
/// ground truth of highest overlap (counted at IoU >= threshold), and
/// average precision-at-rank over the true positives, divided by the number
/// of ground truths.  An empty prediction list scores 0.
double span_average_precision(const std::vector<ScoredSpan>& preds,
                              const std::vector<Span>& gts,
                              double iou_threshold);

/// Average precision of the clip saliency ranking, where positives are the
/// clips whose ground-truth saliency reaches `good_threshold`.  Clips tie
/// toward the lower index.
double saliency_average_precision(const std::vector<double>& pred,
                                  const std::vector<double>& gt,
                                  double good_threshold);

/// Whether the single highest-scored clip (ties toward the lower index) is
/// a positive under `good_threshold`.
bool saliency_hit_at_1(const std::vector<double>& pred,
                       const std::vector<double>& gt, double good_threshold);

/// Corpus-level aggregation; every per-video quantity is the mean over
/// videos in input order.
MetricsReport compute_metrics(const std::vector<VideoEval>& videos,
                              double good_threshold);

}  // namespace uvcom
