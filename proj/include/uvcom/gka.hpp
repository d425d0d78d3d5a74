// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "uvcom/autodiff.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

/// Index of the aggregated moment most aligned with any phrase, by cosine
/// similarity; ties resolve to the lowest index.  Selection is a hard
/// argmax over values, so gradients flow only through the chosen row.
int select_snippet(const Mat& moments, const Mat& phrases);

struct GkaOut {
  ad::Var global;  ///< 1 x D video-level summary
  ad::Var local;   ///< L x D clip-level stream
  int selected = -1;
};

/// Prepends the phrase-selected moment summary to the propagated clip
/// stream and encodes the joint sequence; the summary slot comes back as
/// the global representation, the rest as the local one.
GkaOut gka_accumulate(ad::Tape& t, const ParamVars& pv, ad::Var moments,
                      ad::Var phrases, ad::Var fv_new,
                      const std::vector<int>& clip_mask);

}  // namespace uvcom
