// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "uvcom/metrics.hpp"
#include "uvcom/rng.hpp"
#include "uvcom/span.hpp"

using uvcom::Interval;
using uvcom::ScoredSpan;
using uvcom::Span;

TEST_CASE("interval iou and giou hand values") {
  // Identical spans.
  CHECK(uvcom::temporal_iou(Interval{0.2, 0.6}, Interval{0.2, 0.6}) == 1.0);
  CHECK(uvcom::temporal_giou(Interval{0.2, 0.6}, Interval{0.2, 0.6}) == 1.0);
  // Touching spans share no interior: iou 0, and the hull is exactly the
  // union so giou is 0 as well.
  CHECK(uvcom::temporal_iou(Interval{0.0, 0.5}, Interval{0.5, 1.0}) == 0.0);
  CHECK(uvcom::temporal_giou(Interval{0.0, 0.5}, Interval{0.5, 1.0}) == 0.0);
  // One third overlap.
  CHECK(std::abs(uvcom::temporal_iou(Interval{0.0, 0.2}, Interval{0.1, 0.3}) -
                 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(uvcom::temporal_giou(Interval{0.0, 0.2}, Interval{0.1, 0.3}) -
                 1.0 / 3.0) < 1e-12);
  // Far-apart short spans: giou approaches -1 as the gap dominates.
  CHECK(std::abs(uvcom::temporal_giou(Interval{0.0, 0.1}, Interval{0.9, 1.0}) -
                 (-0.8)) < 1e-12);
  // Degenerate: two identical points.
  CHECK(uvcom::temporal_giou(Interval{0.3, 0.3}, Interval{0.3, 0.3}) == 0.0);
}

TEST_CASE("span/interval conversions round trip") {
  const Span s{0.4, 0.2};
  const Interval iv = uvcom::to_interval(s);
  CHECK(std::abs(iv.start - 0.3) < 1e-12);
  CHECK(std::abs(iv.end - 0.5) < 1e-12);
  const Span back = uvcom::to_span(iv);
  CHECK(std::abs(back.center - s.center) < 1e-12);
  CHECK(std::abs(back.width - s.width) < 1e-12);
}

TEST_CASE("ap hand case: correct prediction ranked second scores one half") {
  std::vector<Span> gts = {Span{0.5, 0.2}};
  std::vector<ScoredSpan> preds = {
      {Span{0.1, 0.1}, 0.9},  // rank 1, no overlap
      {Span{0.5, 0.2}, 0.5},  // rank 2, exact hit
  };
  CHECK(std::abs(uvcom::span_average_precision(preds, gts, 0.5) - 0.5) <
        1e-12);
}

TEST_CASE("ap is 1 when every ground truth is found first") {
  std::vector<Span> gts = {Span{0.2, 0.2}, Span{0.7, 0.2}};
  std::vector<ScoredSpan> preds = {
      {Span{0.2, 0.2}, 0.9},
      {Span{0.7, 0.2}, 0.8},
  };
  CHECK(uvcom::span_average_precision(preds, gts, 0.5) == 1.0);
  // Missing predictions score 0.
  CHECK(uvcom::span_average_precision({}, gts, 0.5) == 0.0);
}

TEST_CASE("saliency ap hand case: single positive at rank 4 of 4") {
  std::vector<double> gt = {0.9, 0.1, 0.2, 0.3};
  std::vector<double> pred = {0.0, 3.0, 2.0, 1.0};
  CHECK(std::abs(uvcom::saliency_average_precision(pred, gt, 0.8) - 0.25) <
        1e-12);
}

TEST_CASE("hit at 1 breaks ties toward the lower index") {
  std::vector<double> gt = {0.1, 0.9, 0.9, 0.1};
  std::vector<double> pred_tie = {1.0, 1.0, 1.0, 1.0};
  // Ties pick clip 0, which is not good.
  CHECK_FALSE(uvcom::saliency_hit_at_1(pred_tie, gt, 0.8));
  std::vector<double> pred = {0.0, 0.5, 1.0, 0.0};
  CHECK(uvcom::saliency_hit_at_1(pred, gt, 0.8));
}

TEST_CASE("span ap agrees with an independent oracle on random instances") {
  uvcom::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_gt = rng.uniform_int(1, 4);
    const int n_pred = rng.uniform_int(0, 6);
    std::vector<Span> gts;
    std::vector<std::pair<double, double>> gt_iv;
    for (int g = 0; g < n_gt; ++g) {
      const double c = rng.uniform(0.2, 0.8);
      const double w = rng.uniform(0.05, 0.3);
      gts.push_back(Span{c, w});
      gt_iv.emplace_back(c - w / 2, c + w / 2);
    }
    std::vector<ScoredSpan> preds;
    for (int p = 0; p < n_pred; ++p) {
      const double c = rng.uniform(0.2, 0.8);
      const double w = rng.uniform(0.05, 0.3);
      preds.push_back({Span{c, w}, rng.uniform()});
    }
    const auto order = uvcom::rank_by_score(preds);
    std::vector<std::pair<double, double>> ranked;
    for (int idx : order) {
      const auto iv = uvcom::to_interval(preds[static_cast<size_t>(idx)].span);
      ranked.emplace_back(iv.start, iv.end);
    }
    for (double thr : {0.3, 0.5, 0.75}) {
      const double got = uvcom::span_average_precision(preds, gts, thr);
      const double want = oracle::ranked_ap(ranked, gt_iv, thr);
      CHECK(std::abs(got - want) < 1e-12);
    }
  }
}

TEST_CASE("compute_metrics aggregates per-video means") {
  std::vector<uvcom::VideoEval> videos(2);
  videos[0].video_id = "a";
  videos[0].gt_spans = {Span{0.5, 0.2}};
  videos[0].predictions = {{Span{0.5, 0.2}, 1.0}};
  videos[0].gt_saliency = {1.0, 0.0};
  videos[0].pred_saliency = {2.0, 1.0};
  videos[1].video_id = "b";
  videos[1].gt_spans = {Span{0.3, 0.2}};
  videos[1].predictions = {{Span{0.8, 0.1}, 1.0}};  // complete miss
  videos[1].gt_saliency = {0.0, 1.0};
  videos[1].pred_saliency = {2.0, 1.0};  // top-1 is clip 0, a miss

  const auto r = uvcom::compute_metrics(videos, 0.8);
  CHECK(r.num_videos == 2);
  CHECK(r.r1_at_05 == 0.5);
  CHECK(r.r1_at_07 == 0.5);
  CHECK(r.map_at_05 == 0.5);
  CHECK(r.map_avg == 0.5);
  CHECK(r.hit_at_1 == 0.5);
  // Video a: positive at rank 1 (ap 1).  Video b: positive at rank 2
  // (ap 1/2).  Mean 0.75.
  CHECK(std::abs(r.hd_map - 0.75) < 1e-12);
}
