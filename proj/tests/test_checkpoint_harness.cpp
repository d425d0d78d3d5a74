// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvcom/harness.hpp"
#include "uvcom/model.hpp"

using uvcom::Mat;
namespace ad = uvcom::ad;
namespace fs = std::filesystem;

namespace {

uvcom::CorpusSpec smoke_spec(int videos = 8) {
  uvcom::CorpusSpec spec;
  spec.num_videos = videos;
  spec.clips_per_video = 6;
  spec.tokens_per_query = 3;
  spec.feature_dim = 8;
  spec.num_concepts = 4;
  spec.moments_lo = 1;
  spec.moments_hi = 2;
  spec.noise_sigma = 0.3;
  spec.seed = 5;
  return spec;
}

uvcom::TrainConfig smoke_config() {
  uvcom::TrainConfig cfg;
  cfg.hidden_dim = 16;
  cfg.num_heads = 2;
  cfg.fusion_layers = 1;
  cfg.gka_layers = 1;
  cfg.decoder_layers = 1;
  cfg.n_v = 4;
  cfg.n_t = 2;
  cfg.em_iterations = 3;
  cfg.conv_kernel = 3;
  cfg.sal_dim = 8;
  cfg.batch_size = 3;
  cfg.epochs = 2;
  cfg.learning_rate = 3e-4;
  cfg.val_fraction = 0.25;
  cfg.margin_pairs = 4;
  return cfg;
}

uvcom::TrainState make_state(std::uint64_t seed) {
  const uvcom::CorpusSpec spec = smoke_spec();
  const uvcom::TrainConfig cfg = smoke_config();
  uvcom::TrainState state;
  state.config = cfg;
  const uvcom::ModelDims dims = uvcom::dims_from_config(
      cfg, spec.feature_dim, spec.tokens_per_query);
  uvcom::Rng rng(seed);
  state.params = uvcom::init_params(dims, rng);
  state.step = 123;
  uvcom::Rng mrng(seed + 1);
  for (const auto& [name, mat] : uvcom::param_entries(state.params)) {
    (void)name;
    state.adam_m.push_back(mrng.normal_mat(static_cast<int>(mat->rows()),
                                           static_cast<int>(mat->cols())));
    state.adam_v.push_back(
        mrng.normal_mat(static_cast<int>(mat->rows()),
                        static_cast<int>(mat->cols())).cwiseAbs());
  }
  return state;
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("uvcom_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double max_param_diff(const uvcom::ModelParams& a,
                      const uvcom::ModelParams& b) {
  const auto ea = uvcom::param_entries(a);
  const auto eb = uvcom::param_entries(b);
  REQUIRE(ea.size() == eb.size());
  double worst = 0.0;
  for (size_t i = 0; i < ea.size(); ++i) {
    worst = std::max(worst,
                     (*ea[i].second - *eb[i].second).cwiseAbs().maxCoeff());
  }
  return worst;
}

struct ScopedThreads {
  explicit ScopedThreads(const char* value) {
    setenv("UVCOM_THREADS", value, 1);
  }
  ~ScopedThreads() { unsetenv("UVCOM_THREADS"); }
};

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const fs::path dir = temp_dir("ckpt");
  const std::string path = (dir / "state.ckpt").string();
  uvcom::TrainState state = make_state(77);
  uvcom::save_checkpoint(state, path);
  uvcom::TrainState back = uvcom::load_checkpoint(path);

  CHECK(back.step == state.step);
  CHECK(back.params.dims == state.params.dims);
  CHECK(uvcom::config_to_json_text(back.config) ==
        uvcom::config_to_json_text(state.config));
  CHECK(max_param_diff(state.params, back.params) == 0.0);
  REQUIRE(back.adam_m.size() == state.adam_m.size());
  REQUIRE(back.adam_v.size() == state.adam_v.size());
  for (size_t i = 0; i < state.adam_m.size(); ++i) {
    CHECK((state.adam_m[i] - back.adam_m[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((state.adam_v[i] - back.adam_v[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint without optimizer state round trips") {
  const fs::path dir = temp_dir("ckpt_noopt");
  const std::string path = (dir / "state.ckpt").string();
  uvcom::TrainState state = make_state(78);
  state.adam_m.clear();
  state.adam_v.clear();
  uvcom::save_checkpoint(state, path);
  uvcom::TrainState back = uvcom::load_checkpoint(path);
  CHECK(back.adam_m.empty());
  CHECK(back.adam_v.empty());
  CHECK(max_param_diff(state.params, back.params) == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects garbage") {
  const fs::path dir = temp_dir("ckpt_bad");
  const std::string bad = (dir / "bad.ckpt").string();
  {
    std::ofstream os(bad, std::ios::binary);
    os << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(uvcom::load_checkpoint(bad), std::runtime_error);

  const std::string good = (dir / "good.ckpt").string();
  uvcom::TrainState state = make_state(79);
  uvcom::save_checkpoint(state, good);
  std::ifstream is(good, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  const std::string cut = (dir / "cut.ckpt").string();
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<long>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(uvcom::load_checkpoint(cut), std::runtime_error);
  CHECK_THROWS_AS(uvcom::load_checkpoint((dir / "absent.ckpt").string()),
                  std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("reloaded weights reproduce the forward pass bitwise") {
  const uvcom::CorpusSpec spec = smoke_spec();
  const uvcom::Corpus corpus = uvcom::generate_corpus(spec);
  const fs::path dir = temp_dir("ckpt_fwd");
  const std::string path = (dir / "state.ckpt").string();
  uvcom::TrainState state = make_state(80);
  uvcom::save_checkpoint(state, path);
  uvcom::TrainState back = uvcom::load_checkpoint(path);

  auto forward = [&](const uvcom::ModelParams& p) {
    ad::Tape t;
    uvcom::ParamVars pv = uvcom::bind_params(t, p, false);
    uvcom::ForwardOut fwd = uvcom::model_forward(
        t, pv, state.config, corpus.items[0].clip_features,
        corpus.items[0].token_features, true);
    return std::pair<Mat, Mat>(fwd.heads.spans.val(), fwd.saliency.val());
  };
  auto [s1, a1] = forward(state.params);
  auto [s2, a2] = forward(back.params);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a1 - a2).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("validation split is deterministic, disjoint and seed sensitive") {
  uvcom::CorpusSpec spec = smoke_spec(400);
  const uvcom::Corpus corpus = uvcom::generate_corpus(spec);

  std::vector<int> tr1, va1, tr2, va2;
  uvcom::split_corpus(corpus, 3, 0.2, tr1, va1);
  uvcom::split_corpus(corpus, 3, 0.2, tr2, va2);
  CHECK(tr1 == tr2);
  CHECK(va1 == va2);

  std::set<int> all(tr1.begin(), tr1.end());
  all.insert(va1.begin(), va1.end());
  CHECK(all.size() == corpus.items.size());
  CHECK(tr1.size() + va1.size() == corpus.items.size());

  // Buckets are uniform enough that 20 percent lands in a wide band.
  CHECK(va1.size() > corpus.items.size() / 10);
  CHECK(va1.size() < corpus.items.size() * 3 / 10);

  // Membership agrees with the predicate the split is built from.
  for (int idx : va1) {
    CHECK(uvcom::is_validation_video(
        corpus.items[static_cast<size_t>(idx)].video_id, 3, 0.2));
  }

  std::vector<int> tr3, va3;
  uvcom::split_corpus(corpus, 4, 0.2, tr3, va3);
  CHECK(va3 != va1);
}

TEST_CASE("training runs are reproducible and threading invariant") {
  const uvcom::Corpus corpus = uvcom::generate_corpus(smoke_spec());
  const uvcom::TrainConfig cfg = smoke_config();

  uvcom::TrainOutcome a, b, c;
  {
    ScopedThreads env("1");
    a = uvcom::train(cfg, corpus, "");
    b = uvcom::train(cfg, corpus, "");
  }
  {
    ScopedThreads env("3");
    c = uvcom::train(cfg, corpus, "");
  }

  REQUIRE(a.steps.size() == b.steps.size());
  REQUIRE(a.steps.size() == c.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].loss.total == b.steps[i].loss.total);
    CHECK(a.steps[i].loss.total == c.steps[i].loss.total);
    CHECK(a.steps[i].grad_norm == c.steps[i].grad_norm);
  }
  CHECK(max_param_diff(a.state.params, b.state.params) == 0.0);
  CHECK(max_param_diff(a.state.params, c.state.params) == 0.0);
  CHECK(a.final_val.r1_at_05 == c.final_val.r1_at_05);
  CHECK(a.final_val.hd_map == c.final_val.hd_map);
}

TEST_CASE("training drives the loss down on a tiny corpus") {
  const uvcom::Corpus corpus = uvcom::generate_corpus(smoke_spec());
  uvcom::TrainConfig cfg = smoke_config();
  cfg.epochs = 6;
  cfg.learning_rate = 1e-3;
  cfg.lr_drop_epoch = 100;

  uvcom::TrainOutcome out = uvcom::train(cfg, corpus, "");
  REQUIRE(out.steps.size() >= 6);
  const double first = out.steps.front().loss.total;
  double last_avg = 0.0;
  for (size_t i = out.steps.size() - 3; i < out.steps.size(); ++i) {
    last_avg += out.steps[i].loss.total;
  }
  last_avg /= 3.0;
  CHECK(last_avg < first);
  CHECK(out.state.step == static_cast<std::int64_t>(out.steps.size()));
  CHECK(out.val_history.size() == static_cast<size_t>(cfg.epochs));
}

TEST_CASE("zero epoch training evaluates the fresh weights") {
  const uvcom::Corpus corpus = uvcom::generate_corpus(smoke_spec());
  uvcom::TrainConfig cfg = smoke_config();
  cfg.epochs = 0;
  uvcom::TrainOutcome out = uvcom::train(cfg, corpus, "");
  CHECK(out.steps.empty());
  CHECK(out.state.step == 0);
  CHECK(out.best_epoch == 0);
  CHECK(out.best_val.num_videos == out.final_val.num_videos);
}

TEST_CASE("training writes logs, checkpoints and reports") {
  const uvcom::Corpus corpus = uvcom::generate_corpus(smoke_spec());
  const uvcom::TrainConfig cfg = smoke_config();
  const fs::path dir = temp_dir("train_out");

  uvcom::TrainOutcome out = uvcom::train(cfg, corpus, dir.string());
  for (const char* name :
       {"train_log.csv", "val_log.csv", "best.ckpt", "final.ckpt",
        "metrics.json", "predictions.jsonl", "config.json"}) {
    INFO(name);
    CHECK(fs::exists(dir / name));
  }

  uvcom::TrainState final_state =
      uvcom::load_checkpoint((dir / "final.ckpt").string());
  CHECK(final_state.step == out.state.step);
  CHECK(max_param_diff(final_state.params, out.state.params) == 0.0);
  REQUIRE(!final_state.adam_m.empty());

  uvcom::TrainState best_state =
      uvcom::load_checkpoint((dir / "best.ckpt").string());
  CHECK(best_state.adam_m.empty());

  // The metrics file parses and mirrors the outcome.
  std::ifstream mis(dir / "metrics.json");
  nlohmann::json mj = nlohmann::json::parse(mis);
  CHECK(mj.at("num_videos").get<int>() == out.final_val.num_videos);
  CHECK(mj.at("r1_at_05").get<double>() == out.final_val.r1_at_05);

  // Each prediction line parses and keeps spans ranked by score.
  std::ifstream pis(dir / "predictions.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(pis, line)) {
    if (line.empty()) continue;
    ++lines;
    nlohmann::json j = nlohmann::json::parse(line);
    REQUIRE(j.contains("video_id"));
    REQUIRE(j.contains("saliency"));
    const auto& spans = j.at("spans");
    for (size_t i = 1; i < spans.size(); ++i) {
      CHECK(spans[i - 1][2].get<double>() >= spans[i][2].get<double>());
    }
  }
  CHECK(lines == out.final_val.num_videos);

  // The training log has one row per step plus the header.
  std::ifstream tis(dir / "train_log.csv");
  int csv_lines = 0;
  while (std::getline(tis, line)) {
    if (!line.empty()) ++csv_lines;
  }
  CHECK(csv_lines == static_cast<int>(out.steps.size()) + 1);
  fs::remove_all(dir);
}

TEST_CASE("ablation sweep trains the baseline plus one row per switch") {
  const uvcom::Corpus corpus = uvcom::generate_corpus(smoke_spec());
  uvcom::TrainConfig cfg = smoke_config();
  cfg.epochs = 1;

  auto rows = uvcom::ablate(cfg, corpus, {"disable_lrp", "disable_mcl"});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "full");
  CHECK(rows[1].name == "disable_lrp");
  CHECK(rows[1].config.disable_lrp);
  CHECK(rows[2].name == "disable_mcl");
  CHECK(rows[2].config.disable_mcl);

  const std::string table = uvcom::format_ablation_table(rows);
  CHECK(table.find("full") != std::string::npos);
  CHECK(table.find("disable_lrp") != std::string::npos);
  CHECK(table.find("r1@0.5") != std::string::npos);

  CHECK_THROWS_AS(uvcom::ablate(cfg, corpus, {"disable_everything"}),
                  std::invalid_argument);
}
