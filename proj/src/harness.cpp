// SPDX-License-Identifier: Apache-2.0
#include "uvcom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "uvcom/model.hpp"

namespace uvcom {

namespace {

// Derived-stream ids; arbitrary but fixed so runs stay reproducible.
constexpr std::uint64_t kStreamInit = 0x496E6974ULL;
constexpr std::uint64_t kStreamShuffle = 0x53687566ULL;
constexpr std::uint64_t kStreamMargin = 0x4D617267ULL;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t scramble(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Runs fn(i) for i in [0, n) on worker threads; item i belongs to thread
/// i % T, so the work split is a pure function of n and T.
void parallel_items(int n, int threads, const std::function<void(int)>& fn) {
  const int t = std::max(1, std::min(threads, n));
  if (t == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(t));
  for (int tid = 0; tid < t; ++tid) {
    pool.emplace_back([&, tid]() {
      for (int i = tid; i < n; i += t) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

double sigmoid_value(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

/// Per-item training artifacts; the tape owns every intermediate, so it
/// must stay alive until the backward pass has been consumed.
struct ItemWork {
  ad::Tape tape;
  ParamVars pv;
  ForwardOut fwd;
  ad::Var item_total;
  LossReport report;
};

void check_finite(double x, const char* term, std::int64_t step) {
  if (!std::isfinite(x)) {
    std::ostringstream os;
    os << "training step " << step << ": non-finite " << term;
    throw std::runtime_error(os.str());
  }
}

}  // namespace

std::uint64_t margin_stream_seed(std::uint64_t cfg_seed, std::int64_t step) {
  return Rng::derive(cfg_seed,
                     kStreamMargin + static_cast<std::uint64_t>(step))
      .bits();
}

BatchStep run_batch(const TrainConfig& cfg, const Corpus& corpus,
                    const ModelParams& params,
                    const std::vector<int>& batch_idx, std::int64_t step,
                    int threads) {
  const int b = static_cast<int>(batch_idx.size());
  const LossWeights w = weights_from_config(cfg);
  const bool mcl_on = !cfg.disable_mcl;
  const bool use_hard = cfg.lambda_hard > 0.0 && b > 1;
  const bool use_vld = mcl_on && cfg.lambda_vld > 0.0 && b > 1;

  const std::uint64_t step_seed = margin_stream_seed(cfg.seed, step);

  std::vector<std::unique_ptr<ItemWork>> works(static_cast<size_t>(b));
  for (auto& wptr : works) wptr = std::make_unique<ItemWork>();

  parallel_items(b, threads, [&](int pos) {
    ItemWork& iw = *works[static_cast<size_t>(pos)];
    const int idx = batch_idx[static_cast<size_t>(pos)];
    const VideoTextPair& pair = corpus.items[static_cast<size_t>(idx)];
    ad::Tape& t = iw.tape;
    iw.pv = bind_params(t, params, true);

    iw.fwd = model_forward(t, iw.pv, cfg, pair.clip_features,
                           pair.token_features, true);

    // Deep supervision: every decoder level carries a full-weight
    // detection loss; the reported terms are the sums across levels.
    DetectionLosses det = detection_losses(t, iw.fwd.heads.spans,
                                           iw.fwd.heads.fg_logits,
                                           pair.gt_spans, cfg);
    ad::Var l1 = det.l1;
    ad::Var giou = det.giou;
    ad::Var fg = det.fg;
    for (size_t k = 0; k < iw.fwd.heads.aux_spans.size(); ++k) {
      DetectionLosses dk = detection_losses(t, iw.fwd.heads.aux_spans[k],
                                            iw.fwd.heads.aux_fg[k],
                                            pair.gt_spans, cfg);
      l1 = ad::add(l1, dk.l1);
      giou = ad::add(giou, dk.giou);
      fg = ad::add(fg, dk.fg);
    }

    Rng margin_rng = Rng::derive(step_seed, static_cast<std::uint64_t>(idx));
    const std::vector<int> membership =
        moment_membership(pair.gt_spans, corpus.spec.clips_per_video);
    ad::Var margin = margin_loss(t, iw.fwd.saliency, membership,
                                 cfg.margin_delta, cfg.margin_pairs,
                                 margin_rng);
    ad::Var rank = rank_aware_loss(t, iw.fwd.saliency, pair.gt_saliency,
                                   cfg.rank_tau, cfg.saliency_levels);

    ad::Var total = ad::scale(l1, w.lambda_l1);
    total = ad::add(total, ad::scale(giou, w.lambda_giou));
    total = ad::add(total, fg);
    total = ad::add(total, ad::scale(ad::add(margin, rank), w.lambda_hd));

    iw.report.l1 = l1.val()(0, 0);
    iw.report.giou = giou.val()(0, 0);
    iw.report.fg = fg.val()(0, 0);
    iw.report.margin = margin.val()(0, 0);
    iw.report.rank = rank.val()(0, 0);

    if (use_hard) {
      const int other = batch_idx[static_cast<size_t>((pos + 1) % b)];
      const VideoTextPair& mismatched =
          corpus.items[static_cast<size_t>(other)];
      ForwardOut hard_fwd =
          model_forward(t, iw.pv, cfg, pair.clip_features,
                        mismatched.token_features, false);
      ad::Var hard = hard_negative_loss(t, hard_fwd.saliency);
      total = ad::add(total, ad::scale(hard, w.lambda_hard));
      iw.report.hard = hard.val()(0, 0);
    }

    if (mcl_on && cfg.lambda_cta > 0.0) {
      ad::Var cta =
          cta_loss(t, iw.fwd.fv_new, iw.fwd.fused_tokens,
                   pair.relevance_mask);
      total = ad::add(total, ad::scale(cta, w.lambda_cta));
      iw.report.cta = cta.val()(0, 0);
    }
    iw.item_total = total;
  });

  // Batch-level discrimination term: runs on its own little tape over the
  // per-item summary vectors, then hands each item its share of the
  // gradient before the big per-item backward sweeps.
  double vld_value = 0.0;
  const int hidden = params.dims.hidden;
  Mat fvg_mat(b, hidden), ft_mat(b, hidden);
  Mat fvg_grad = Mat::Zero(b, hidden);
  Mat ft_grad = Mat::Zero(b, hidden);
  if (use_vld) {
    for (int pos = 0; pos < b; ++pos) {
      fvg_mat.row(pos) = works[static_cast<size_t>(pos)]->fwd.global_token
                             .val().row(0);
      ft_mat.row(pos) = works[static_cast<size_t>(pos)]->fwd.ft_sentence
                            .val().row(0);
    }
    ad::Tape bt;
    ad::Var fvg = bt.leaf(&fvg_mat);
    ad::Var ft = bt.leaf(&ft_mat);
    ad::Var vld = vld_loss(bt, fvg, ft, cfg.vld_tau);
    vld_value = vld.val()(0, 0);
    bt.seed(vld, Mat::Constant(1, 1, cfg.lambda_vld));
    bt.run_backward();
    fvg_grad = bt.grad(fvg);
    ft_grad = bt.grad(ft);
  }

  const auto entries = param_entries(params);
  std::vector<std::vector<Mat>> item_grads(static_cast<size_t>(b));

  parallel_items(b, threads, [&](int pos) {
    ItemWork& iw = *works[static_cast<size_t>(pos)];
    iw.tape.seed(iw.item_total, Mat::Constant(1, 1, 1.0 / b));
    if (use_vld) {
      iw.tape.seed(iw.fwd.global_token, fvg_grad.row(pos));
      iw.tape.seed(iw.fwd.ft_sentence, ft_grad.row(pos));
    }
    iw.tape.run_backward();
    accumulate_grads(iw.tape, iw.pv, item_grads[static_cast<size_t>(pos)]);
  });

  BatchStep out;
  for (int pos = 0; pos < b; ++pos) {
    out.loss += works[static_cast<size_t>(pos)]->report;
    works[static_cast<size_t>(pos)].reset();  // free the tape early
    if (pos > 0) {
      auto& acc = item_grads[0];
      auto& cur = item_grads[static_cast<size_t>(pos)];
      for (size_t k = 0; k < acc.size(); ++k) acc[k] += cur[k];
      cur.clear();
    }
  }
  out.loss *= 1.0 / b;
  out.loss.vld = vld_value;
  out.loss.total = weighted_total(out.loss, w);
  out.grads = std::move(item_grads[0]);
  if (out.grads.size() != entries.size()) {
    throw std::runtime_error("run_batch: gradient list misaligned");
  }
  return out;
}

namespace {

/// Decoupled-weight-decay adaptive moments, the published update rule.
struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Mat> m, v;
  std::int64_t t = 0;

  void init(const ModelParams& params) {
    m.clear();
    v.clear();
    for (const auto& [name, mat] : param_entries(params)) {
      m.push_back(Mat::Zero(mat->rows(), mat->cols()));
      v.push_back(Mat::Zero(mat->rows(), mat->cols()));
    }
  }

  void step(ModelParams& params, const std::vector<Mat>& grads, double lr,
            double weight_decay) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto entries = param_entries(params);
    for (size_t k = 0; k < entries.size(); ++k) {
      Mat& p = *entries[k].second;
      const Mat& g = grads[k];
      m[k] = beta1 * m[k] + (1.0 - beta1) * g;
      v[k] = beta2 * v[k] + (1.0 - beta2) * g.cwiseProduct(g);
      const Mat mhat = m[k] / bc1;
      const Mat vhat = v[k] / bc2;
      p -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
      p -= (lr * weight_decay) * p;
    }
  }
};

double validation_score(const MetricsReport& r) {
  return r.r1_at_05 + r.hit_at_1 + r.map_avg;
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("UVCOM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

bool is_validation_video(const std::string& video_id, std::uint64_t seed,
                         double val_fraction) {
  const std::uint64_t h =
      scramble(fnv1a64(video_id) ^ (seed * 0x9E3779B97F4A7C15ULL));
  const auto bucket = static_cast<double>(h % 1000000ULL) / 1000000.0;
  return bucket < val_fraction;
}

void split_corpus(const Corpus& corpus, std::uint64_t seed,
                  double val_fraction, std::vector<int>& train_idx,
                  std::vector<int>& val_idx) {
  train_idx.clear();
  val_idx.clear();
  for (size_t i = 0; i < corpus.items.size(); ++i) {
    const bool val =
        is_validation_video(corpus.items[i].video_id, seed, val_fraction);
    (val ? val_idx : train_idx).push_back(static_cast<int>(i));
  }
}

EvalResult evaluate_model(const ModelParams& params, const TrainConfig& cfg,
                          const Corpus& corpus,
                          const std::vector<int>& indices) {
  EvalResult out;
  out.videos.resize(indices.size());
  parallel_items(static_cast<int>(indices.size()), thread_count(),
                 [&](int pos) {
    const VideoTextPair& pair =
        corpus.items[static_cast<size_t>(indices[static_cast<size_t>(pos)])];
    ad::Tape t;
    ParamVars pv = bind_params(t, params, false);
    ForwardOut fwd = model_forward(t, pv, cfg, pair.clip_features,
                                   pair.token_features, true);
    VideoEval& ve = out.videos[static_cast<size_t>(pos)];
    ve.video_id = pair.video_id;
    ve.gt_spans = pair.gt_spans;
    ve.gt_saliency = pair.gt_saliency;
    const Mat spans = fwd.heads.spans.val();
    const Mat logits = fwd.heads.fg_logits.val();
    for (int q = 0; q < spans.rows(); ++q) {
      ve.predictions.push_back(
          {Span{spans(q, 0), spans(q, 1)}, sigmoid_value(logits(q, 0))});
    }
    const Mat sal = fwd.saliency.val();
    ve.pred_saliency.resize(static_cast<size_t>(sal.rows()));
    for (int i = 0; i < sal.rows(); ++i) {
      ve.pred_saliency[static_cast<size_t>(i)] = sal(i, 0);
    }
  });
  out.report = compute_metrics(out.videos, cfg.good_saliency);
  return out;
}

void write_predictions_jsonl(const EvalResult& eval, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("predictions: cannot open " + path);
  for (const VideoEval& ve : eval.videos) {
    nlohmann::json j;
    j["video_id"] = ve.video_id;
    nlohmann::json spans = nlohmann::json::array();
    for (int idx : rank_by_score(ve.predictions)) {
      const ScoredSpan& s = ve.predictions[static_cast<size_t>(idx)];
      const Interval iv = to_interval(s.span);
      spans.push_back({iv.start, iv.end, s.score});
    }
    j["spans"] = spans;
    j["saliency"] = ve.pred_saliency;
    os << j.dump() << "\n";
  }
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["r1_at_05"] = report.r1_at_05;
  j["r1_at_07"] = report.r1_at_07;
  j["map_at_05"] = report.map_at_05;
  j["map_at_075"] = report.map_at_075;
  j["map_avg"] = report.map_avg;
  j["hd_map"] = report.hd_map;
  j["hit_at_1"] = report.hit_at_1;
  j["num_videos"] = report.num_videos;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("metrics: cannot open " + path);
  os << j.dump(2) << "\n";
}

TrainOutcome train(const TrainConfig& cfg, const Corpus& corpus,
                   const std::string& out_dir) {
  cfg.validate();
  if (corpus.items.empty()) {
    throw std::invalid_argument("train: empty corpus");
  }

  const bool to_disk = !out_dir.empty();
  if (to_disk) std::filesystem::create_directories(out_dir);

  std::ofstream train_csv, val_csv;
  if (to_disk) {
    train_csv.open(out_dir + "/train_log.csv", std::ios::trunc);
    val_csv.open(out_dir + "/val_log.csv", std::ios::trunc);
    train_csv << "step,epoch,lr,l1,giou,fg,margin,rank,hard,cta,vld,total,"
                 "grad_norm\n";
    val_csv << "epoch,r1_at_05,r1_at_07,map_at_05,map_at_075,map_avg,"
               "hit_at_1,hd_map,num_videos\n";
    train_csv << std::setprecision(17);
    val_csv << std::setprecision(17);
    save_config(cfg, out_dir + "/config.json");
  }

  const ModelDims dims = dims_from_config(cfg, corpus.spec.feature_dim,
                                          corpus.spec.tokens_per_query);
  Rng init_rng = Rng::derive(cfg.seed, kStreamInit);
  TrainOutcome out;
  out.state.config = cfg;
  out.state.params = init_params(dims, init_rng);

  std::vector<int> train_idx, val_idx;
  split_corpus(corpus, cfg.seed, cfg.val_fraction, train_idx, val_idx);
  if (train_idx.empty()) {
    throw std::invalid_argument("train: validation split ate every video");
  }
  // A degenerate split still needs something to report metrics on.
  if (val_idx.empty()) val_idx = train_idx;

  AdamW opt;
  opt.init(out.state.params);
  const int threads = thread_count();
  const double clip = cfg.grad_clip;
  std::int64_t step = 0;
  double best_score = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train_idx;
    Rng shuffle_rng =
        Rng::derive(cfg.seed, kStreamShuffle + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    const double lr = cfg.learning_rate *
                      (epoch >= cfg.lr_drop_epoch ? 0.1 : 1.0);

    for (size_t b0 = 0; b0 < order.size();
         b0 += static_cast<size_t>(cfg.batch_size)) {
      const size_t b1 =
          std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
      const std::vector<int> batch(order.begin() + static_cast<long>(b0),
                                   order.begin() + static_cast<long>(b1));
      ++step;
      BatchStep bs = run_batch(cfg, corpus, out.state.params, batch, step,
                               threads);
      check_finite(bs.loss.l1, "l1 term", step);
      check_finite(bs.loss.giou, "giou term", step);
      check_finite(bs.loss.fg, "foreground term", step);
      check_finite(bs.loss.margin, "margin term", step);
      check_finite(bs.loss.rank, "rank term", step);
      check_finite(bs.loss.hard, "hard-negative term", step);
      check_finite(bs.loss.cta, "alignment term", step);
      check_finite(bs.loss.vld, "discrimination term", step);
      check_finite(bs.loss.total, "total", step);

      double sq = 0.0;
      for (const Mat& g : bs.grads) sq += g.squaredNorm();
      const double grad_norm = std::sqrt(sq);
      check_finite(grad_norm, "gradient norm", step);
      if (clip > 0.0 && grad_norm > clip) {
        const double s = clip / grad_norm;
        for (Mat& g : bs.grads) g *= s;
      }
      opt.step(out.state.params, bs.grads, lr, cfg.weight_decay);

      StepLog log{step, epoch, lr, grad_norm, bs.loss};
      out.steps.push_back(log);
      if (to_disk) {
        train_csv << step << ',' << epoch << ',' << lr << ',' << bs.loss.l1
                  << ',' << bs.loss.giou << ',' << bs.loss.fg << ','
                  << bs.loss.margin << ',' << bs.loss.rank << ','
                  << bs.loss.hard << ',' << bs.loss.cta << ',' << bs.loss.vld
                  << ',' << bs.loss.total << ',' << grad_norm << '\n';
      }
    }

    EvalResult ev = evaluate_model(out.state.params, cfg, corpus, val_idx);
    out.val_history.emplace_back(epoch, ev.report);
    if (to_disk) {
      const MetricsReport& r = ev.report;
      val_csv << epoch << ',' << r.r1_at_05 << ',' << r.r1_at_07 << ','
              << r.map_at_05 << ',' << r.map_at_075 << ',' << r.map_avg << ','
              << r.hit_at_1 << ',' << r.hd_map << ',' << r.num_videos << '\n';
      train_csv.flush();
      val_csv.flush();
    }
    if (validation_score(ev.report) > best_score) {
      best_score = validation_score(ev.report);
      out.best_val = ev.report;
      out.best_epoch = epoch;
      if (to_disk) {
        // Evaluation-only snapshot: weights without optimizer state.
        TrainState best;
        best.config = cfg;
        best.params = out.state.params;
        best.step = step;
        save_checkpoint(best, out_dir + "/best.ckpt");
      }
    }
  }

  out.state.adam_m = std::move(opt.m);
  out.state.adam_v = std::move(opt.v);
  out.state.step = step;

  EvalResult final_ev = evaluate_model(out.state.params, cfg, corpus,
                                       val_idx);
  out.final_val = final_ev.report;
  if (cfg.epochs == 0) {
    out.best_val = out.final_val;
    out.best_epoch = 0;
  }
  if (to_disk) {
    save_checkpoint(out.state, out_dir + "/final.ckpt");
    write_metrics_json(out.final_val, out_dir + "/metrics.json");
    write_predictions_jsonl(final_ev, out_dir + "/predictions.jsonl");
  }
  return out;
}

std::vector<AblationRow> ablate(const TrainConfig& base, const Corpus& corpus,
                                const std::vector<std::string>& switches) {
  std::vector<AblationRow> rows;
  auto run_one = [&](const std::string& name, const TrainConfig& cfg) {
    TrainOutcome outcome = train(cfg, corpus, "");
    rows.push_back(AblationRow{name, cfg, outcome.final_val});
  };
  run_one("full", base);
  for (const std::string& s : switches) {
    TrainConfig cfg = base;
    if (s == "disable_dbia") {
      cfg.disable_dbia = true;
    } else if (s == "disable_lrp") {
      cfg.disable_lrp = true;
    } else if (s == "disable_gka") {
      cfg.disable_gka = true;
    } else if (s == "disable_mcl") {
      cfg.disable_mcl = true;
    } else {
      throw std::invalid_argument("ablate: unknown switch '" + s + "'");
    }
    run_one(s, cfg);
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "variant" << std::right
     << std::setw(10) << "r1@0.5" << std::setw(10) << "r1@0.7"
     << std::setw(10) << "map_avg" << std::setw(10) << "hit@1"
     << std::setw(10) << "hd_map" << "\n";
  os << std::fixed << std::setprecision(4);
  for (const AblationRow& row : rows) {
    os << std::left << std::setw(14) << row.name << std::right
       << std::setw(10) << row.val.r1_at_05 << std::setw(10)
       << row.val.r1_at_07 << std::setw(10) << row.val.map_avg
       << std::setw(10) << row.val.hit_at_1 << std::setw(10)
       << row.val.hd_map << "\n";
  }
  return os.str();
}

}  // namespace uvcom
