// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uvcom/checkpoint.hpp"
#include "uvcom/config.hpp"
#include "uvcom/corpus.hpp"
#include "uvcom/losses.hpp"
#include "uvcom/metrics.hpp"

namespace uvcom {

/// Worker count: UVCOM_THREADS when set (clamped to >= 1), otherwise the
/// hardware count.  Work is partitioned by item index, so results do not
/// depend on this value.
int thread_count();

/// Seed-stable membership test for the held-out split.
bool is_validation_video(const std::string& video_id, std::uint64_t seed,
                         double val_fraction);

void split_corpus(const Corpus& corpus, std::uint64_t seed,
                  double val_fraction, std::vector<int>& train_idx,
                  std::vector<int>& val_idx);

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double grad_norm = 0.0;
  LossReport loss;
};

struct BatchStep {
  LossReport loss;         ///< terms averaged over the batch
  std::vector<Mat> grads;  ///< aligned with param_entries order
};

/// Loss and parameter gradients for one optimization step over the given
/// corpus items.  Per-item graphs run on worker threads; the batch-level
/// discrimination term is computed once over the item summaries and its
/// gradient is folded back into each item before the backward sweeps.
/// The reduction order is fixed by batch position, so results are
/// independent of the worker count.
BatchStep run_batch(const TrainConfig& cfg, const Corpus& corpus,
                    const ModelParams& params,
                    const std::vector<int>& batch_idx, std::int64_t step,
                    int threads);

/// Stream id mixed with the config seed and step to draw margin pairs;
/// exposed so reference computations can reproduce the sampling.
std::uint64_t margin_stream_seed(std::uint64_t cfg_seed, std::int64_t step);

struct EvalResult {
  MetricsReport report;
  std::vector<VideoEval> videos;  ///< predictions + ground truth per video
};

/// Inference over the selected corpus items (no gradients).
EvalResult evaluate_model(const ModelParams& params, const TrainConfig& cfg,
                          const Corpus& corpus,
                          const std::vector<int>& indices);

/// One ranked-prediction JSON object per line, consumable by the metrics
/// tooling.
void write_predictions_jsonl(const EvalResult& eval, const std::string& path);
void write_metrics_json(const MetricsReport& report, const std::string& path);

struct TrainOutcome {
  TrainState state;  ///< final weights, optimizer state, step counter
  MetricsReport final_val;
  MetricsReport best_val;
  int best_epoch = -1;
  std::vector<StepLog> steps;
  std::vector<std::pair<int, MetricsReport>> val_history;
};

/// Full training run.  When `out_dir` is nonempty it receives train_log.csv,
/// val_log.csv, best.ckpt, final.ckpt, metrics.json and predictions.jsonl;
/// an empty string keeps the run entirely in memory.
TrainOutcome train(const TrainConfig& cfg, const Corpus& corpus,
                   const std::string& out_dir);

struct AblationRow {
  std::string name;
  TrainConfig config;
  MetricsReport val;
};

/// Trains the baseline plus one variant per switch name (identical seed)
/// and reports validation metrics side by side.  Valid switch names:
/// disable_dbia, disable_lrp, disable_gka, disable_mcl.
std::vector<AblationRow> ablate(const TrainConfig& base, const Corpus& corpus,
                                const std::vector<std::string>& switches);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace uvcom
