// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uvcom/config.hpp"
#include "uvcom/corpus.hpp"

using uvcom::Corpus;
using uvcom::CorpusSpec;
using uvcom::Span;

namespace {

CorpusSpec small_spec() {
  CorpusSpec s;
  s.num_videos = 12;
  s.clips_per_video = 16;
  s.tokens_per_query = 4;
  s.feature_dim = 8;
  s.num_concepts = 5;
  s.noise_sigma = 0.3;
  s.seed = 7;
  return s;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/uvcom_test_") + name;
}

}  // namespace

TEST_CASE("generation is deterministic in the spec") {
  const CorpusSpec spec = small_spec();
  Corpus a = uvcom::generate_corpus(spec);
  Corpus b = uvcom::generate_corpus(spec);
  REQUIRE(a.items.size() == b.items.size());
  CHECK(a.prototypes == b.prototypes);
  for (size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].clip_features == b.items[i].clip_features);
    CHECK(a.items[i].token_features == b.items[i].token_features);
    CHECK(a.items[i].gt_saliency == b.items[i].gt_saliency);
  }
  Corpus c = uvcom::generate_corpus([&] {
    CorpusSpec s = spec;
    s.seed = 8;
    return s;
  }());
  CHECK(a.items[0].clip_features != c.items[0].clip_features);
}

TEST_CASE("structural invariants hold on every generated video") {
  Corpus corpus = uvcom::generate_corpus(small_spec());
  const int L = corpus.spec.clips_per_video;
  for (const auto& item : corpus.items) {
    REQUIRE(!item.gt_spans.empty());
    REQUIRE(static_cast<int>(item.gt_spans.size()) <= corpus.spec.moments_hi);

    // Spans live in [0,1], are clip-aligned and pairwise disjoint.
    std::vector<std::pair<double, double>> ivs;
    int covered = 0;
    for (const Span& s : item.gt_spans) {
      const auto iv = uvcom::to_interval(s);
      CHECK(iv.start >= -1e-12);
      CHECK(iv.end <= 1.0 + 1e-12);
      CHECK(s.width >= 2.0 / L - 1e-12);
      covered += static_cast<int>(std::lround(s.width * L));
      ivs.emplace_back(iv.start, iv.end);
    }
    std::sort(ivs.begin(), ivs.end());
    for (size_t i = 1; i < ivs.size(); ++i) {
      CHECK(ivs[i].first >= ivs[i - 1].second - 1e-12);
    }

    // Relevance mask matches the spans exactly.
    int mask_sum = 0;
    for (int f : item.relevance_mask) mask_sum += f;
    CHECK(mask_sum == covered);
    for (int i = 0; i < L; ++i) {
      bool inside = false;
      const double mid = (i + 0.5) / L;
      for (const auto& iv : ivs) {
        inside = inside || (mid > iv.first && mid < iv.second);
      }
      CHECK(item.relevance_mask[static_cast<size_t>(i)] == (inside ? 1 : 0));
    }

    // Saliency peaks at exactly 1 inside the moments and is 0 outside.
    double best = 0.0;
    for (int i = 0; i < L; ++i) {
      const double s = item.gt_saliency[static_cast<size_t>(i)];
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      if (item.relevance_mask[static_cast<size_t>(i)] == 0) CHECK(s == 0.0);
      best = std::max(best, s);
    }
    CHECK(best == 1.0);

    // Features are unit rows.
    for (int i = 0; i < item.clip_features.rows(); ++i) {
      CHECK(std::abs(item.clip_features.row(i).norm() - 1.0) < 1e-9);
    }
    for (int i = 0; i < item.token_features.rows(); ++i) {
      CHECK(std::abs(item.token_features.row(i).norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("zero noise copies prototypes bit-exactly") {
  CorpusSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  Corpus corpus = uvcom::generate_corpus(spec);
  for (const auto& item : corpus.items) {
    for (int i = 0; i < item.clip_features.rows(); ++i) {
      bool match = false;
      for (int k = 0; k < corpus.prototypes.rows(); ++k) {
        if (item.clip_features.row(i) == corpus.prototypes.row(k)) {
          match = true;
        }
      }
      CHECK(match);
    }
    for (double s : item.gt_saliency) {
      CHECK((s == 0.0 || s == 1.0));
    }
  }
}

TEST_CASE("tokens point at query concepts recoverable at zero noise") {
  CorpusSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  Corpus corpus = uvcom::generate_corpus(spec);
  for (const auto& item : corpus.items) {
    // Every token equals some prototype, and that prototype also labels at
    // least one relevant clip.
    for (int t = 0; t < item.token_features.rows(); ++t) {
      int proto_idx = -1;
      for (int k = 0; k < corpus.prototypes.rows(); ++k) {
        if (item.token_features.row(t) == corpus.prototypes.row(k)) {
          proto_idx = k;
        }
      }
      REQUIRE(proto_idx >= 0);
      bool used = false;
      for (int i = 0; i < item.clip_features.rows(); ++i) {
        if (item.relevance_mask[static_cast<size_t>(i)] == 1 &&
            item.clip_features.row(i) == corpus.prototypes.row(proto_idx)) {
          used = true;
        }
      }
      CHECK(used);
    }
  }
}

TEST_CASE("jsonl round trip is bit-exact") {
  const std::string path = temp_path("roundtrip.jsonl");
  Corpus a = uvcom::generate_corpus(small_spec());
  uvcom::write_corpus_jsonl(a, path);
  Corpus b = uvcom::read_corpus_jsonl(path);
  REQUIRE(a.items.size() == b.items.size());
  CHECK(a.prototypes == b.prototypes);
  CHECK(a.spec.noise_sigma == b.spec.noise_sigma);
  for (size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].video_id == b.items[i].video_id);
    CHECK(a.items[i].clip_features == b.items[i].clip_features);
    CHECK(a.items[i].token_features == b.items[i].token_features);
    CHECK(a.items[i].gt_saliency == b.items[i].gt_saliency);
    CHECK(a.items[i].relevance_mask == b.items[i].relevance_mask);
    REQUIRE(a.items[i].gt_spans.size() == b.items[i].gt_spans.size());
    for (size_t k = 0; k < a.items[i].gt_spans.size(); ++k) {
      CHECK(a.items[i].gt_spans[k].center == b.items[i].gt_spans[k].center);
      CHECK(a.items[i].gt_spans[k].width == b.items[i].gt_spans[k].width);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("an empty corpus is just a header and reads back") {
  CorpusSpec spec = small_spec();
  spec.num_videos = 0;
  const std::string path = temp_path("empty.jsonl");
  uvcom::write_corpus_jsonl(uvcom::generate_corpus(spec), path);
  std::ifstream in(path);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 1);
  Corpus back = uvcom::read_corpus_jsonl(path);
  CHECK(back.items.empty());
  std::remove(path.c_str());
}

TEST_CASE("a corrupted record fails with the offending line named") {
  const std::string path = temp_path("corrupt.jsonl");
  Corpus a = uvcom::generate_corpus(small_spec());
  uvcom::write_corpus_jsonl(a, path);

  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  // Break the span field of the third pair (line 4).
  auto pos = lines[3].find("\"gt_spans\":[[");
  REQUIRE(pos != std::string::npos);
  lines[3].replace(pos, 13, "\"gt_spans\":[[\"x\",");
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
  out.close();

  try {
    uvcom::read_corpus_jsonl(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("infeasible moment packing is rejected") {
  CorpusSpec spec = small_spec();
  spec.clips_per_video = 4;
  spec.moments_hi = 3;
  CHECK_THROWS_AS(uvcom::generate_corpus(spec), std::invalid_argument);
}

TEST_CASE("config json round trip and unknown keys") {
  uvcom::TrainConfig cfg;
  cfg.learning_rate = 3e-4;
  cfg.disable_lrp = true;
  cfg.n_v = 12;
  const std::string text = uvcom::config_to_json_text(cfg);
  uvcom::TrainConfig back = uvcom::config_from_json_text(text);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.disable_lrp == cfg.disable_lrp);
  CHECK(back.n_v == cfg.n_v);
  CHECK(back.lambda_l1 == 10.0);

  CHECK_THROWS_AS(uvcom::config_from_json_text("{\"learnign_rate\": 1}"),
                  std::runtime_error);
  CHECK_THROWS_AS(uvcom::config_from_json_text("{\"omega\": 1.5}"),
                  std::invalid_argument);
  // Missing keys fall back to defaults.
  uvcom::TrainConfig sparse = uvcom::config_from_json_text("{\"n_t\": 4}");
  CHECK(sparse.n_t == 4);
  CHECK(sparse.hidden_dim == 256);
}
