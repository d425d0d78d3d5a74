// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uvcom/span.hpp"

namespace uvcom {

/// Parameters of the synthetic retrieval corpus.
struct CorpusSpec {
  int num_videos = 512;
  int clips_per_video = 32;   ///< L
  int tokens_per_query = 6;   ///< N
  int feature_dim = 64;       ///< raw feature dimension
  int num_concepts = 8;       ///< prototype vocabulary size
  int moments_lo = 1;
  int moments_hi = 3;
  double noise_sigma = 0.3;   ///< expected feature noise norm
  std::uint64_t seed = 0;

  /// Shortest/longest moment in clips.
  int min_moment_len() const { return 2; }
  int max_moment_len() const;

  void validate() const;
};

/// One video paired with one query, fully labeled.
struct VideoTextPair {
  std::string video_id;
  Eigen::MatrixXd clip_features;   ///< L x feature_dim, unit rows
  Eigen::MatrixXd token_features;  ///< N x feature_dim, unit rows
  std::vector<Span> gt_spans;      ///< normalized (center, width)
  std::vector<double> gt_saliency; ///< per clip, max over a video is 1
  std::vector<int> relevance_mask; ///< 1 inside some ground-truth moment
};

struct Corpus {
  CorpusSpec spec;
  Eigen::MatrixXd prototypes;  ///< num_concepts x feature_dim, unit rows
  std::vector<VideoTextPair> items;
};

/// Deterministic generation: equal specs yield bitwise-equal corpora, and
/// each video draws from its own derived stream.
Corpus generate_corpus(const CorpusSpec& spec);

/// JSONL with a header line (spec + prototypes) followed by one line per
/// pair.  Doubles survive a write/read round trip bit-exactly.
void write_corpus_jsonl(const Corpus& corpus, const std::string& path);

/// Throws std::runtime_error naming the offending line on malformed input.
Corpus read_corpus_jsonl(const std::string& path);

}  // namespace uvcom
