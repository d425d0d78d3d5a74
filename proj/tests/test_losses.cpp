// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "uvcom/losses.hpp"
#include "uvcom/rng.hpp"

using uvcom::Mat;
using uvcom::Span;
namespace ad = uvcom::ad;

namespace {

const double kLn2 = std::log(2.0);

Mat col(std::initializer_list<double> xs) {
  Mat m(static_cast<int>(xs.size()), 1);
  int i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("span losses vanish on a perfect match") {
  ad::Tape t;
  Mat spans(2, 2);
  spans << 0.3, 0.2, 0.7, 0.1;
  std::vector<Span> gts = {{0.3, 0.2}, {0.7, 0.1}};
  auto sl = uvcom::span_losses(t, t.constant(spans), {0, 1}, gts);
  CHECK(sl.matched == 2);
  CHECK(std::abs(sl.l1.val()(0, 0)) < 1e-12);
  CHECK(std::abs(sl.giou.val()(0, 0)) < 1e-12);
}

TEST_CASE("span l1 is the absolute center and width gap") {
  ad::Tape t;
  Mat spans(1, 2);
  spans << 0.5, 0.2;
  std::vector<Span> gts = {{0.5, 0.4}};
  auto sl = uvcom::span_losses(t, t.constant(spans), {0}, gts);
  CHECK(std::abs(sl.l1.val()(0, 0) - 0.2) < 1e-12);
}

TEST_CASE("span giou loss hand values") {
  // Disjoint at opposite ends: giou = -0.8, loss 1.8.
  {
    ad::Tape t;
    Mat spans(1, 2);
    spans << 0.05, 0.1;  // interval [0, 0.1]
    std::vector<Span> gts = {{0.95, 0.1}};  // interval [0.9, 1.0]
    auto sl = uvcom::span_losses(t, t.constant(spans), {0}, gts);
    CHECK(std::abs(sl.giou.val()(0, 0) - 1.8) < 1e-12);
  }
  // Half-overlapping, hull equals union: giou = iou = 1/3, loss 2/3.
  {
    ad::Tape t;
    Mat spans(1, 2);
    spans << 0.25, 0.5;  // [0, 0.5]
    std::vector<Span> gts = {{0.5, 0.5}};  // [0.25, 0.75]
    auto sl = uvcom::span_losses(t, t.constant(spans), {0}, gts);
    CHECK(std::abs(sl.giou.val()(0, 0) - 2.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("span losses with no matched targets are zero") {
  ad::Tape t;
  Mat spans(2, 2);
  spans << 0.3, 0.2, 0.7, 0.1;
  std::vector<Span> gts = {{0.5, 0.5}};
  auto sl = uvcom::span_losses(t, t.constant(spans), {-1}, gts);
  CHECK(sl.matched == 0);
  CHECK(sl.l1.val()(0, 0) == 0.0);
  CHECK(sl.giou.val()(0, 0) == 0.0);
}

TEST_CASE("foreground loss at zero logits is ln 2 for any weighting") {
  ad::Tape t;
  ad::Var logits = t.constant(col({0.0, 0.0}));
  ad::Var loss = uvcom::foreground_loss(t, logits, {0}, 2, 0.1);
  CHECK(std::abs(loss.val()(0, 0) - kLn2) < 1e-12);
}

TEST_CASE("foreground loss weights background queries down") {
  ad::Tape t;
  ad::Var logits = t.constant(col({2.0, 0.0}));
  ad::Var loss = uvcom::foreground_loss(t, logits, {0}, 2, 0.1);
  // Matched query: softplus(2) - 2 = log(1 + e^-2); background: 0.1 * ln 2.
  const double expect = (std::log1p(std::exp(-2.0)) + 0.1 * kLn2) / 1.1;
  CHECK(std::abs(loss.val()(0, 0) - expect) < 1e-12);
}

TEST_CASE("foreground loss is small when logits are confident and right") {
  ad::Tape t;
  ad::Var logits = t.constant(col({8.0, -8.0}));
  ad::Var loss = uvcom::foreground_loss(t, logits, {0}, 2, 0.1);
  CHECK(loss.val()(0, 0) < 1e-3);
}

TEST_CASE("moment membership marks clips whose center falls inside a span") {
  std::vector<Span> gts = {{0.3, 0.2}};  // interval [0.2, 0.4]
  auto inside = uvcom::moment_membership(gts, 10);
  // Clip centers 0.25 and 0.35 fall inside.
  std::vector<int> expect = {0, 0, 1, 1, 0, 0, 0, 0, 0, 0};
  CHECK(inside == expect);
}

TEST_CASE("margin loss hand values") {
  std::vector<int> membership = {1, 1, 0, 0};
  // Outside clips score above inside: every pair costs delta + 0.1.
  {
    ad::Tape t;
    uvcom::Rng rng(3);
    ad::Var p = t.constant(col({0.1, 0.1, 0.2, 0.2}));
    ad::Var loss = uvcom::margin_loss(t, p, membership, 0.2, 8, rng);
    CHECK(std::abs(loss.val()(0, 0) - 0.3) < 1e-12);
  }
  // Equal scores cost exactly delta.
  {
    ad::Tape t;
    uvcom::Rng rng(3);
    ad::Var p = t.constant(col({0.5, 0.5, 0.5, 0.5}));
    ad::Var loss = uvcom::margin_loss(t, p, membership, 0.2, 8, rng);
    CHECK(std::abs(loss.val()(0, 0) - 0.2) < 1e-12);
  }
  // Separation beyond delta costs nothing.
  {
    ad::Tape t;
    uvcom::Rng rng(3);
    ad::Var p = t.constant(col({2.0, 2.0, 0.0, 0.0}));
    ad::Var loss = uvcom::margin_loss(t, p, membership, 0.2, 8, rng);
    CHECK(loss.val()(0, 0) == 0.0);
  }
}

TEST_CASE("margin loss degenerate pools yield zero") {
  ad::Tape t;
  uvcom::Rng rng(3);
  ad::Var p = t.constant(col({0.1, 0.9, 0.5}));
  CHECK(uvcom::margin_loss(t, p, {1, 1, 1}, 0.2, 8, rng).val()(0, 0) == 0.0);
  CHECK(uvcom::margin_loss(t, p, {0, 0, 0}, 0.2, 8, rng).val()(0, 0) == 0.0);
  CHECK(uvcom::margin_loss(t, p, {1, 0, 1}, 0.2, 0, rng).val()(0, 0) == 0.0);
}

TEST_CASE("margin loss is deterministic in the rng seed") {
  std::vector<int> membership = {1, 0, 1, 0, 0, 1, 0};
  auto run = [&] {
    ad::Tape t;
    uvcom::Rng rng(17);
    ad::Var p = t.constant(col({0.3, 0.6, 0.1, 0.8, 0.2, 0.9, 0.4}));
    return uvcom::margin_loss(t, p, membership, 0.2, 8, rng).val()(0, 0);
  };
  CHECK(run() == run());
}

TEST_CASE("rank aware loss on a two clip split at equal scores is ln 2") {
  ad::Tape t;
  ad::Var p = t.constant(col({0.4, 0.4}));
  ad::Var loss = uvcom::rank_aware_loss(t, p, {1.0, 0.0}, 0.5, 5);
  CHECK(std::abs(loss.val()(0, 0) - kLn2) < 1e-12);
}

TEST_CASE("rank aware loss on constant ground truth is zero") {
  ad::Tape t;
  ad::Var p = t.constant(col({0.9, 0.1, 0.5}));
  ad::Var loss = uvcom::rank_aware_loss(t, p, {0.7, 0.7, 0.7}, 0.5, 5);
  CHECK(loss.val()(0, 0) == 0.0);
}

TEST_CASE("rank aware loss prefers scores ordered like the ground truth") {
  std::vector<double> gt = {1.0, 0.75, 0.5, 0.25, 0.0};
  auto eval = [&](std::initializer_list<double> scores) {
    ad::Tape t;
    ad::Var p = t.constant(col(scores));
    return uvcom::rank_aware_loss(t, p, gt, 0.5, 5).val()(0, 0);
  };
  const double aligned = eval({2.0, 1.0, 0.0, -1.0, -2.0});
  const double reversed = eval({-2.0, -1.0, 0.0, 1.0, 2.0});
  CHECK(aligned < reversed);
}

TEST_CASE("hard negative loss is softplus of the raw score") {
  ad::Tape t;
  {
    ad::Var p = t.constant(col({0.0, 0.0, 0.0}));
    CHECK(std::abs(uvcom::hard_negative_loss(t, p).val()(0, 0) - kLn2) <
          1e-12);
  }
  {
    ad::Var p = t.constant(col({-20.0, -20.0}));
    CHECK(uvcom::hard_negative_loss(t, p).val()(0, 0) < 1e-8);
  }
  {
    ad::Var p = t.constant(col({3.0, -1.0}));
    const double expect =
        0.5 * (std::log1p(std::exp(3.0)) + std::log1p(std::exp(-1.0)));
    CHECK(std::abs(uvcom::hard_negative_loss(t, p).val()(0, 0) - expect) <
          1e-12);
  }
}

TEST_CASE("clip to sentence loss hand cases") {
  // Both clips point the same way as the sentence: uniform softmax, and a
  // single positive pays ln 2.
  {
    ad::Tape t;
    Mat fv(2, 2), ft(1, 2);
    fv << 2.0, 0.0, 5.0, 0.0;
    ft << 1.0, 0.0;
    ad::Var loss =
        uvcom::cta_loss(t, t.constant(fv), t.constant(ft), {1, 0});
    CHECK(std::abs(loss.val()(0, 0) - kLn2) < 1e-12);
  }
  // No relevant clips: zero.
  {
    ad::Tape t;
    Mat fv(2, 2), ft(1, 2);
    fv << 1.0, 0.0, 0.0, 1.0;
    ft << 1.0, 0.0;
    ad::Var loss =
        uvcom::cta_loss(t, t.constant(fv), t.constant(ft), {0, 0});
    CHECK(loss.val()(0, 0) == 0.0);
  }
}

TEST_CASE("clip to sentence loss ignores clip magnitudes") {
  uvcom::Rng rng(5);
  const Mat fv = rng.normal_mat(6, 4);
  const Mat ft = rng.normal_mat(3, 4);
  Mat fv_scaled = fv;
  for (int i = 0; i < fv.rows(); ++i) fv_scaled.row(i) *= 1.0 + i;
  std::vector<int> rel = {1, 0, 1, 1, 0, 0};
  auto eval = [&](const Mat& v) {
    ad::Tape t;
    return uvcom::cta_loss(t, t.constant(v), t.constant(ft), rel).val()(0, 0);
  };
  CHECK(std::abs(eval(fv) - eval(fv_scaled)) < 1e-12);
}

TEST_CASE("video language alignment loss edge cases") {
  // A single pair has no negatives to contrast against.
  {
    ad::Tape t;
    uvcom::Rng rng(9);
    ad::Var loss = uvcom::vld_loss(t, t.constant(rng.normal_mat(1, 6)),
                                   t.constant(rng.normal_mat(1, 6)), 0.07);
    CHECK(loss.val()(0, 0) == 0.0);
  }
  // Identical rows are indistinguishable: both directions pay ln B.
  {
    ad::Tape t;
    uvcom::Rng rng(9);
    const Mat row = rng.normal_mat(1, 6);
    Mat v(4, 6), s(4, 6);
    for (int i = 0; i < 4; ++i) {
      v.row(i) = row;
      s.row(i) = row;
    }
    ad::Var loss = uvcom::vld_loss(t, t.constant(v), t.constant(s), 0.07);
    CHECK(std::abs(loss.val()(0, 0) - std::log(4.0)) < 1e-12);
  }
}

TEST_CASE("video language alignment loss is permutation invariant") {
  uvcom::Rng rng(21);
  const Mat v = rng.normal_mat(5, 8);
  const Mat s = rng.normal_mat(5, 8);
  std::vector<int> perm = {3, 0, 4, 1, 2};
  Mat vp(5, 8), sp(5, 8);
  for (int i = 0; i < 5; ++i) {
    vp.row(i) = v.row(perm[static_cast<size_t>(i)]);
    sp.row(i) = s.row(perm[static_cast<size_t>(i)]);
  }
  auto eval = [&](const Mat& a, const Mat& b) {
    ad::Tape t;
    return uvcom::vld_loss(t, t.constant(a), t.constant(b), 0.07).val()(0, 0);
  };
  CHECK(std::abs(eval(v, s) - eval(vp, sp)) < 1e-12);
}

TEST_CASE("weighted total recombines the report terms") {
  uvcom::TrainConfig cfg;
  uvcom::LossWeights w = uvcom::weights_from_config(cfg);
  uvcom::LossReport r;
  r.l1 = 0.2;
  r.giou = 0.5;
  r.fg = 0.3;
  r.margin = 0.1;
  r.rank = 0.4;
  r.hard = 0.6;
  r.cta = 0.7;
  r.vld = 0.8;
  const double expect = 10.0 * 0.2 + 1.0 * 0.5 + 0.3 + 1.0 * (0.1 + 0.4) +
                        1.0 * 0.6 + 0.5 * 0.7 + 0.5 * 0.8;
  CHECK(std::abs(uvcom::weighted_total(r, w) - expect) < 1e-12);

  uvcom::LossReport only_l1;
  only_l1.l1 = 0.2;
  CHECK(std::abs(uvcom::weighted_total(only_l1, w) - 2.0) < 1e-12);
}

TEST_CASE("loss report accumulation and scaling") {
  uvcom::LossReport a, b;
  a.l1 = 1.0;
  a.total = 3.0;
  b.l1 = 2.0;
  b.total = 5.0;
  a += b;
  CHECK(a.l1 == 3.0);
  CHECK(a.total == 8.0);
  a *= 0.5;
  CHECK(a.l1 == 1.5);
  CHECK(a.total == 4.0);
}

TEST_CASE("span and foreground losses match finite differences") {
  uvcom::Rng rng(31);
  Mat spans(4, 2);
  spans << 0.30, 0.25, 0.62, 0.18, 0.45, 0.40, 0.80, 0.12;
  Mat logits(4, 1);
  logits << 0.4, -0.7, 1.2, -0.2;
  std::vector<Mat> leaves = {spans, logits};
  std::vector<Span> gts = {{0.35, 0.30}, {0.60, 0.20}};
  std::vector<int> q_for_gt = {0, 1};
  const double worst = testutil::fd_check_leaves(
      leaves,
      [&](ad::Tape& t, const std::vector<ad::Var>& vs) {
        auto sl = uvcom::span_losses(t, vs[0], q_for_gt, gts);
        ad::Var fg = uvcom::foreground_loss(t, vs[1], q_for_gt, 4, 0.1);
        return ad::add(ad::add(sl.l1, sl.giou), fg);
      },
      40, rng);
  CHECK(worst < 1e-4);
}

TEST_CASE("saliency losses match finite differences") {
  uvcom::Rng rng(32);
  Mat p = rng.normal_mat(8, 1);
  std::vector<Mat> leaves = {p};
  std::vector<int> membership = {1, 1, 0, 0, 1, 0, 0, 1};
  std::vector<double> gt = {1.0, 0.75, 0.0, 0.25, 1.0, 0.0, 0.5, 0.75};
  const double worst = testutil::fd_check_leaves(
      leaves,
      [&](ad::Tape& t, const std::vector<ad::Var>& vs) {
        uvcom::Rng pair_rng(7);
        ad::Var m =
            uvcom::margin_loss(t, vs[0], membership, 0.2, 8, pair_rng);
        ad::Var r = uvcom::rank_aware_loss(t, vs[0], gt, 0.5, 5);
        ad::Var h = uvcom::hard_negative_loss(t, vs[0]);
        return ad::add(ad::add(m, r), h);
      },
      40, rng);
  CHECK(worst < 1e-4);
}

TEST_CASE("alignment losses match finite differences") {
  uvcom::Rng rng(33);
  std::vector<Mat> leaves = {rng.normal_mat(6, 5), rng.normal_mat(3, 5),
                             rng.normal_mat(4, 5), rng.normal_mat(4, 5)};
  std::vector<int> rel = {1, 0, 1, 0, 0, 1};
  const double worst = testutil::fd_check_leaves(
      leaves,
      [&](ad::Tape& t, const std::vector<ad::Var>& vs) {
        ad::Var c = uvcom::cta_loss(t, vs[0], vs[1], rel);
        ad::Var v = uvcom::vld_loss(t, vs[2], vs[3], 0.07);
        return ad::add(c, v);
      },
      40, rng);
  CHECK(worst < 1e-4);
}
