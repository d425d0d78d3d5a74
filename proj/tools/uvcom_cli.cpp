// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: corpus generation, training, evaluation and
// ablation sweeps over the same JSON/JSONL formats the library reads.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uvcom/harness.hpp"

namespace {

void print_report(const uvcom::MetricsReport& r, const std::string& tag) {
  std::cout << std::fixed << std::setprecision(4) << tag
            << ": r1@0.5 " << r.r1_at_05 << "  r1@0.7 " << r.r1_at_07
            << "  map@0.5 " << r.map_at_05 << "  map@0.75 " << r.map_at_075
            << "  map_avg " << r.map_avg << "  hit@1 " << r.hit_at_1
            << "  hd_map " << r.hd_map << "  videos " << r.num_videos
            << "\n";
}

uvcom::TrainConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return uvcom::TrainConfig{};
  return uvcom::load_config(path);
}

std::vector<int> all_indices(const uvcom::Corpus& corpus) {
  std::vector<int> idx(corpus.items.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

void add_into(uvcom::MetricsReport& a, const uvcom::MetricsReport& b) {
  a.r1_at_05 += b.r1_at_05;
  a.r1_at_07 += b.r1_at_07;
  a.map_at_05 += b.map_at_05;
  a.map_at_075 += b.map_at_075;
  a.map_avg += b.map_avg;
  a.hd_map += b.hd_map;
  a.hit_at_1 += b.hit_at_1;
  a.num_videos += b.num_videos;
}

void scale_report(uvcom::MetricsReport& r, double s) {
  r.r1_at_05 *= s;
  r.r1_at_07 *= s;
  r.map_at_05 *= s;
  r.map_at_075 *= s;
  r.map_avg *= s;
  r.hd_map *= s;
  r.hit_at_1 *= s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint moment retrieval and highlight detection workbench"};
  app.require_subcommand(1);

  // datagen
  uvcom::CorpusSpec spec;
  std::string datagen_out;
  CLI::App* datagen = app.add_subcommand(
      "datagen", "generate a labeled synthetic corpus");
  datagen->add_option("--num-videos", spec.num_videos, "video count");
  datagen->add_option("--clips-per-video", spec.clips_per_video,
                      "clips per video");
  datagen->add_option("--tokens-per-query", spec.tokens_per_query,
                      "tokens per query");
  datagen->add_option("--feature-dim", spec.feature_dim,
                      "raw feature dimension");
  datagen->add_option("--num-concepts", spec.num_concepts,
                      "prototype vocabulary size");
  datagen->add_option("--moments-lo", spec.moments_lo,
                      "fewest moments per video");
  datagen->add_option("--moments-hi", spec.moments_hi,
                      "most moments per video");
  datagen->add_option("--noise-sigma", spec.noise_sigma,
                      "expected feature noise norm");
  datagen->add_option("--seed", spec.seed, "generation seed");
  datagen->add_option("--out", datagen_out, "corpus JSONL path")->required();

  // train
  std::string train_config, train_corpus, train_out;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", train_config, "JSON config path");
  train->add_option("--corpus", train_corpus, "corpus JSONL path")
      ->required();
  train->add_option("--out", train_out, "output directory")->required();

  // evaluate
  std::string eval_ckpt, eval_corpus, eval_report, eval_preds;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score a checkpoint on a corpus");
  evaluate->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  evaluate->add_option("--corpus", eval_corpus, "corpus JSONL path")
      ->required();
  evaluate->add_option("--report", eval_report, "metrics JSON path")
      ->required();
  evaluate->add_option("--predictions", eval_preds,
                       "optional ranked-predictions JSONL path");

  // ablate
  std::string abl_config, abl_corpus, abl_out;
  std::vector<std::string> abl_switches;
  int abl_seeds = 1;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "train the full model and disabled variants side by side");
  ablate->add_option("--config", abl_config, "JSON config path");
  ablate->add_option("--corpus", abl_corpus, "corpus JSONL path")
      ->required();
  ablate
      ->add_option("--switches", abl_switches,
                   "disable_dbia disable_lrp disable_gka disable_mcl")
      ->required();
  ablate->add_option("--seeds", abl_seeds,
                     "average this many consecutive seeds");
  ablate->add_option("--out", abl_out, "optional path for the table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (datagen->parsed()) {
      spec.validate();
      uvcom::Corpus corpus = uvcom::generate_corpus(spec);
      uvcom::write_corpus_jsonl(corpus, datagen_out);
      std::cout << "wrote " << corpus.items.size() << " videos to "
                << datagen_out << "\n";
    } else if (train->parsed()) {
      const uvcom::TrainConfig cfg = load_config_or_default(train_config);
      const uvcom::Corpus corpus = uvcom::read_corpus_jsonl(train_corpus);
      uvcom::TrainOutcome out = uvcom::train(cfg, corpus, train_out);
      print_report(out.final_val, "final");
      print_report(out.best_val, "best (epoch " +
                                     std::to_string(out.best_epoch) + ")");
      std::cout << "artifacts in " << train_out << "\n";
    } else if (evaluate->parsed()) {
      const uvcom::TrainState state = uvcom::load_checkpoint(eval_ckpt);
      const uvcom::Corpus corpus = uvcom::read_corpus_jsonl(eval_corpus);
      uvcom::EvalResult ev = uvcom::evaluate_model(
          state.params, state.config, corpus, all_indices(corpus));
      uvcom::write_metrics_json(ev.report, eval_report);
      if (!eval_preds.empty()) uvcom::write_predictions_jsonl(ev, eval_preds);
      print_report(ev.report, "eval");
    } else if (ablate->parsed()) {
      const uvcom::TrainConfig base = load_config_or_default(abl_config);
      const uvcom::Corpus corpus = uvcom::read_corpus_jsonl(abl_corpus);
      if (abl_seeds < 1) throw std::invalid_argument("--seeds must be >= 1");

      std::vector<uvcom::AblationRow> mean_rows;
      for (int s = 0; s < abl_seeds; ++s) {
        uvcom::TrainConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(s);
        std::vector<uvcom::AblationRow> rows =
            uvcom::ablate(cfg, corpus, abl_switches);
        if (s == 0) {
          mean_rows = rows;
        } else {
          for (size_t i = 0; i < rows.size(); ++i) {
            add_into(mean_rows[i].val, rows[i].val);
          }
        }
      }
      if (abl_seeds > 1) {
        for (auto& row : mean_rows) scale_report(row.val, 1.0 / abl_seeds);
      }
      const std::string table = uvcom::format_ablation_table(mean_rows);
      std::cout << table;
      if (!abl_out.empty()) {
        std::ofstream os(abl_out, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + abl_out);
        os << table;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
