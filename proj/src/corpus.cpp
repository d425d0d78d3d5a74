// SPDX-License-Identifier: Apache-2.0
#include "uvcom/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "uvcom/rng.hpp"

namespace uvcom {

namespace {

using nlohmann::json;

constexpr std::uint64_t kPrototypeStream = 0;
constexpr std::uint64_t kVideoStreamBase = 1000;

std::string video_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%05d", index);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols,
                                 const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw std::runtime_error(std::string(what) + ": expected " +
                             std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw std::runtime_error(std::string(what) + ": row " +
                               std::to_string(i) + " must have " +
                               std::to_string(cols) + " values");
    }
    for (int c = 0; c < cols; ++c) {
      const json& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) {
        throw std::runtime_error(std::string(what) + ": non-numeric entry");
      }
      m(i, c) = v.get<double>();
      if (!std::isfinite(m(i, c))) {
        throw std::runtime_error(std::string(what) + ": non-finite entry");
      }
    }
  }
  return m;
}

/// Noisy copy of a prototype row, renormalized to the unit sphere.  The
/// perturbation has per-coordinate deviation sigma/sqrt(dim) so its norm
/// concentrates near sigma.  sigma == 0 returns the prototype bit-exactly.
Eigen::RowVectorXd noisy_feature(const Eigen::RowVectorXd& proto, double sigma,
                                 Rng& rng) {
  if (sigma == 0.0) return proto;
  const int dim = static_cast<int>(proto.size());
  Eigen::RowVectorXd f = proto;
  const double sd = sigma / std::sqrt(static_cast<double>(dim));
  for (int j = 0; j < dim; ++j) f(j) += sd * rng.normal();
  return f / f.norm();
}

}  // namespace

int CorpusSpec::max_moment_len() const {
  return std::max(min_moment_len(), clips_per_video / 4);
}

void CorpusSpec::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("corpus spec: ") + what);
  };
  require(num_videos >= 0, "num_videos must be non-negative");
  require(clips_per_video >= 4, "clips_per_video must be at least 4");
  require(tokens_per_query >= 1, "tokens_per_query must be at least 1");
  require(feature_dim >= 2, "feature_dim must be at least 2");
  require(num_concepts >= 2, "num_concepts must be at least 2");
  require(moments_lo >= 1, "moments_lo must be at least 1");
  require(moments_hi >= moments_lo, "moments_hi must be >= moments_lo");
  require(moments_hi < num_concepts,
          "moments_hi must leave at least one background concept");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  // Worst case must pack: hi moments of minimal length with one-clip gaps.
  require(moments_hi * min_moment_len() + (moments_hi - 1) <= clips_per_video,
          "infeasible moment packing for clips_per_video");
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.spec = spec;

  const int K = spec.num_concepts;
  const int D = spec.feature_dim;
  const int L = spec.clips_per_video;
  const int N = spec.tokens_per_query;

  Rng proto_rng = Rng::derive(spec.seed, kPrototypeStream);
  corpus.prototypes.resize(K, D);
  for (int k = 0; k < K; ++k) {
    Eigen::RowVectorXd p = proto_rng.normal_vec(D).transpose();
    corpus.prototypes.row(k) = p / p.norm();
  }

  corpus.items.reserve(static_cast<size_t>(spec.num_videos));
  for (int v = 0; v < spec.num_videos; ++v) {
    Rng rng = Rng::derive(spec.seed, kVideoStreamBase + v);
    VideoTextPair item;
    item.video_id = video_name(v);

    const int m = std::min(rng.uniform_int(spec.moments_lo, spec.moments_hi),
                           K - 1);
    std::vector<int> concepts = rng.sample_distinct(K, m);

    std::vector<int> lengths(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
      lengths[j] = rng.uniform_int(spec.min_moment_len(), spec.max_moment_len());
    }
    // Deterministic repair when drawn lengths cannot fit with one-clip gaps.
    auto total = [&]() {
      int s = m - 1;
      for (int l : lengths) s += l;
      return s;
    };
    while (total() > L) {
      auto it = std::max_element(lengths.begin(), lengths.end());
      --*it;
    }

    int free = L - total();
    std::vector<int> starts(static_cast<size_t>(m));
    int cursor = 0;
    for (int j = 0; j < m; ++j) {
      const int gap = rng.uniform_int(0, free);
      free -= gap;
      cursor += gap + (j > 0 ? 1 : 0);
      starts[j] = cursor;
      cursor += lengths[j];
    }

    item.relevance_mask.assign(static_cast<size_t>(L), 0);
    std::vector<int> clip_concept(static_cast<size_t>(L), -1);
    for (int j = 0; j < m; ++j) {
      item.gt_spans.push_back(Span{
          (starts[j] + 0.5 * lengths[j]) / L,
          static_cast<double>(lengths[j]) / L});
      for (int i = starts[j]; i < starts[j] + lengths[j]; ++i) {
        item.relevance_mask[static_cast<size_t>(i)] = 1;
        clip_concept[static_cast<size_t>(i)] = concepts[static_cast<size_t>(j)];
      }
    }

    std::vector<int> background;
    for (int k = 0; k < K; ++k) {
      if (std::find(concepts.begin(), concepts.end(), k) == concepts.end()) {
        background.push_back(k);
      }
    }
    for (int i = 0; i < L; ++i) {
      if (clip_concept[static_cast<size_t>(i)] < 0) {
        clip_concept[static_cast<size_t>(i)] =
            background[static_cast<size_t>(rng.uniform_int(
                0, static_cast<int>(background.size()) - 1))];
      }
    }

    item.clip_features.resize(L, D);
    for (int i = 0; i < L; ++i) {
      item.clip_features.row(i) = noisy_feature(
          corpus.prototypes.row(clip_concept[static_cast<size_t>(i)]),
          spec.noise_sigma, rng);
    }

    item.token_features.resize(N, D);
    for (int tok = 0; tok < N; ++tok) {
      item.token_features.row(tok) = noisy_feature(
          corpus.prototypes.row(concepts[static_cast<size_t>(tok % m)]),
          spec.noise_sigma, rng);
    }

    // Saliency: proximity to the moment's own prototype, sharpened and
    // rescaled so each video peaks at exactly 1.
    item.gt_saliency.assign(static_cast<size_t>(L), 0.0);
    if (spec.noise_sigma == 0.0) {
      for (int i = 0; i < L; ++i) {
        if (item.relevance_mask[static_cast<size_t>(i)] == 1) {
          item.gt_saliency[static_cast<size_t>(i)] = 1.0;
        }
      }
    } else {
      const double sal_sigma = spec.noise_sigma / 3.0;
      double best = 0.0;
      for (int i = 0; i < L; ++i) {
        if (item.relevance_mask[static_cast<size_t>(i)] == 0) continue;
        const double d2 =
            (item.clip_features.row(i) -
             corpus.prototypes.row(clip_concept[static_cast<size_t>(i)]))
                .squaredNorm();
        const double s = std::exp(-d2 / (2.0 * sal_sigma * sal_sigma));
        item.gt_saliency[static_cast<size_t>(i)] = s;
        best = std::max(best, s);
      }
      for (double& s : item.gt_saliency) s /= best;
    }

    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

void write_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("corpus: cannot write " + path);

  json header = {
      {"type", "header"},
      {"num_videos", corpus.spec.num_videos},
      {"clips_per_video", corpus.spec.clips_per_video},
      {"tokens_per_query", corpus.spec.tokens_per_query},
      {"feature_dim", corpus.spec.feature_dim},
      {"num_concepts", corpus.spec.num_concepts},
      {"moments_lo", corpus.spec.moments_lo},
      {"moments_hi", corpus.spec.moments_hi},
      {"noise_sigma", corpus.spec.noise_sigma},
      {"seed", corpus.spec.seed},
      {"prototypes", matrix_to_json(corpus.prototypes)},
  };
  out << header.dump() << "\n";

  for (const VideoTextPair& item : corpus.items) {
    json spans = json::array();
    for (const Span& s : item.gt_spans) {
      spans.push_back(json::array({s.center, s.width}));
    }
    json j = {
        {"type", "pair"},
        {"video_id", item.video_id},
        {"clip_features", matrix_to_json(item.clip_features)},
        {"token_features", matrix_to_json(item.token_features)},
        {"gt_spans", std::move(spans)},
        {"gt_saliency", item.gt_saliency},
        {"relevance_mask", item.relevance_mask},
    };
    out << j.dump() << "\n";
  }
}

Corpus read_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("corpus: cannot open " + path);

  Corpus corpus;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int L = 0;
  int N = 0;
  int D = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "corpus: line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": invalid JSON: " + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") {
          throw std::runtime_error("first line must be the header");
        }
        CorpusSpec& s = corpus.spec;
        s.num_videos = j.at("num_videos").get<int>();
        s.clips_per_video = j.at("clips_per_video").get<int>();
        s.tokens_per_query = j.at("tokens_per_query").get<int>();
        s.feature_dim = j.at("feature_dim").get<int>();
        s.num_concepts = j.at("num_concepts").get<int>();
        s.moments_lo = j.at("moments_lo").get<int>();
        s.moments_hi = j.at("moments_hi").get<int>();
        s.noise_sigma = j.at("noise_sigma").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.validate();
        L = s.clips_per_video;
        N = s.tokens_per_query;
        D = s.feature_dim;
        corpus.prototypes = matrix_from_json(j.at("prototypes"),
                                             s.num_concepts, D, "prototypes");
        have_header = true;
        continue;
      }
      if (type != "pair") {
        throw std::runtime_error("expected a pair record");
      }
      VideoTextPair item;
      item.video_id = j.at("video_id").get<std::string>();
      item.clip_features =
          matrix_from_json(j.at("clip_features"), L, D, "clip_features");
      item.token_features =
          matrix_from_json(j.at("token_features"), N, D, "token_features");
      const json& spans = j.at("gt_spans");
      if (!spans.is_array() || spans.empty()) {
        throw std::runtime_error("gt_spans must be a non-empty array");
      }
      for (const json& sp : spans) {
        if (!sp.is_array() || sp.size() != 2 || !sp[0].is_number() ||
            !sp[1].is_number()) {
          throw std::runtime_error("gt_spans entries must be [center, width]");
        }
        Span s{sp[0].get<double>(), sp[1].get<double>()};
        const Interval iv = to_interval(s);
        if (s.width <= 0.0 || iv.start < -1e-9 || iv.end > 1.0 + 1e-9) {
          throw std::runtime_error("gt_spans entry outside [0, 1]");
        }
        item.gt_spans.push_back(s);
      }
      item.gt_saliency = j.at("gt_saliency").get<std::vector<double>>();
      item.relevance_mask = j.at("relevance_mask").get<std::vector<int>>();
      if (static_cast<int>(item.gt_saliency.size()) != L ||
          static_cast<int>(item.relevance_mask.size()) != L) {
        throw std::runtime_error("per-clip labels must have length " +
                                 std::to_string(L));
      }
      for (int flag : item.relevance_mask) {
        if (flag != 0 && flag != 1) {
          throw std::runtime_error("relevance_mask entries must be 0 or 1");
        }
      }
      corpus.items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error("corpus: missing header line");
  if (static_cast<int>(corpus.items.size()) != corpus.spec.num_videos) {
    throw std::runtime_error(
        "corpus: header promises " + std::to_string(corpus.spec.num_videos) +
        " videos, found " + std::to_string(corpus.items.size()));
  }
  return corpus;
}

}  // namespace uvcom
