// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace uvcom {

/// Every knob of a training run, stored flat so the on-disk JSON config is a
/// plain key-value document.  Defaults reproduce the reference setup.
struct TrainConfig {
  // optimizer and schedule
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 8;
  int epochs = 30;
  int lr_drop_epoch = 20;  ///< learning rate is multiplied by 0.1 here
  std::uint64_t seed = 0;
  double grad_clip = 0.1;  ///< global gradient norm cap
  double val_fraction = 0.2;

  // loss weights
  double lambda_giou = 1.0;
  double lambda_l1 = 10.0;
  double lambda_hd = 1.0;
  double lambda_hard = 1.0;
  double lambda_cta = 0.5;
  double lambda_vld = 0.5;

  // fusion encoder
  int hidden_dim = 256;
  int fusion_layers = 3;
  int num_heads = 8;
  double dropout = 0.0;

  // clip/token aggregation
  int n_v = 30;  ///< moment centroids
  int n_t = 5;   ///< phrase centroids
  int em_iterations = 5;
  double lambda_rbf = 1.0;

  // cross-modal propagation
  double omega = 0.5;
  double lambda_z = 0.0;  ///< affinity logit scale; 0 means 1/sqrt(hidden_dim)
  int conv_kernel = 3;

  // accumulation and heads
  int gka_layers = 3;
  int decoder_layers = 3;
  int sal_dim = 0;  ///< bilinear saliency dim; 0 means hidden_dim

  // loss details
  double margin_delta = 0.2;
  double rank_tau = 0.5;
  double vld_tau = 0.07;
  int margin_pairs = 8;
  double bg_weight = 0.1;  ///< foreground-classifier weight on unmatched queries
  int saliency_levels = 5;
  double good_saliency = 0.8;  ///< threshold defining highlight ground truth

  // ablation switches
  bool disable_dbia = false;
  bool disable_lrp = false;
  bool disable_gka = false;
  bool disable_mcl = false;

  /// Effective affinity scale.
  double lambda_z_effective() const;
  /// Effective bilinear saliency dimension.
  int sal_dim_effective() const { return sal_dim > 0 ? sal_dim : hidden_dim; }

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Serialization to/from a flat JSON object.  Loading rejects unknown keys;
/// missing keys keep their defaults.
TrainConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const TrainConfig& cfg);
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

}  // namespace uvcom
