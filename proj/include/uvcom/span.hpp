// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uvcom {

/// Temporal span in normalized coordinates, stored as (center, width).
struct Span {
  double center = 0.0;
  double width = 0.0;
};

/// Same span as (start, end), start <= end.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
};

inline Interval to_interval(const Span& s) {
  Interval iv{s.center - 0.5 * s.width, s.center + 0.5 * s.width};
  if (iv.end < iv.start) std::swap(iv.start, iv.end);
  return iv;
}

inline Span to_span(const Interval& iv) {
  return Span{0.5 * (iv.start + iv.end), iv.end - iv.start};
}

/// Intersection-over-union of two intervals; 0 when the union is empty.
inline double temporal_iou(const Interval& a, const Interval& b) {
  if (!std::isfinite(a.start) || !std::isfinite(a.end) ||
      !std::isfinite(b.start) || !std::isfinite(b.end)) {
    throw std::invalid_argument("temporal_iou: non-finite interval");
  }
  const double inter = std::max(
      0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Generalized IoU for intervals: IoU - (hull - union) / hull, in (-1, 1].
/// Zero-length hulls (two identical points) degenerate to giou = iou = 0.
inline double temporal_giou(const Interval& a, const Interval& b) {
  const double inter = std::max(
      0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  const double hull = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (hull <= 0.0) return 0.0;
  const double iou = uni > 0.0 ? inter / uni : 0.0;
  return iou - (hull - uni) / hull;
}

inline double temporal_iou(const Span& a, const Span& b) {
  return temporal_iou(to_interval(a), to_interval(b));
}

inline double temporal_giou(const Span& a, const Span& b) {
  return temporal_giou(to_interval(a), to_interval(b));
}

}  // namespace uvcom
