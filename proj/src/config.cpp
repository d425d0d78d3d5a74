// SPDX-License-Identifier: Apache-2.0
#include "uvcom/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace uvcom {

namespace {

using nlohmann::json;

/// Single description of every field; load and save both walk this table so
/// the two can never drift apart.
template <class F>
void for_each_field(TrainConfig& c, F&& f) {
  f("learning_rate", c.learning_rate);
  f("weight_decay", c.weight_decay);
  f("batch_size", c.batch_size);
  f("epochs", c.epochs);
  f("lr_drop_epoch", c.lr_drop_epoch);
  f("seed", c.seed);
  f("grad_clip", c.grad_clip);
  f("val_fraction", c.val_fraction);
  f("lambda_giou", c.lambda_giou);
  f("lambda_l1", c.lambda_l1);
  f("lambda_hd", c.lambda_hd);
  f("lambda_hard", c.lambda_hard);
  f("lambda_cta", c.lambda_cta);
  f("lambda_vld", c.lambda_vld);
  f("hidden_dim", c.hidden_dim);
  f("fusion_layers", c.fusion_layers);
  f("num_heads", c.num_heads);
  f("dropout", c.dropout);
  f("n_v", c.n_v);
  f("n_t", c.n_t);
  f("em_iterations", c.em_iterations);
  f("lambda_rbf", c.lambda_rbf);
  f("omega", c.omega);
  f("lambda_z", c.lambda_z);
  f("conv_kernel", c.conv_kernel);
  f("gka_layers", c.gka_layers);
  f("decoder_layers", c.decoder_layers);
  f("sal_dim", c.sal_dim);
  f("margin_delta", c.margin_delta);
  f("rank_tau", c.rank_tau);
  f("vld_tau", c.vld_tau);
  f("margin_pairs", c.margin_pairs);
  f("bg_weight", c.bg_weight);
  f("saliency_levels", c.saliency_levels);
  f("good_saliency", c.good_saliency);
  f("disable_dbia", c.disable_dbia);
  f("disable_lrp", c.disable_lrp);
  f("disable_gka", c.disable_gka);
  f("disable_mcl", c.disable_mcl);
}

}  // namespace

double TrainConfig::lambda_z_effective() const {
  return lambda_z > 0.0 ? lambda_z : 1.0 / std::sqrt(double(hidden_dim));
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 0, "epochs must be non-negative");
  require(lr_drop_epoch >= 1, "lr_drop_epoch must be at least 1");
  require(grad_clip > 0.0, "grad_clip must be positive");
  require(val_fraction >= 0.0 && val_fraction < 1.0,
          "val_fraction must be in [0, 1)");
  require(hidden_dim >= 1, "hidden_dim must be positive");
  require(num_heads >= 1, "num_heads must be positive");
  require(hidden_dim % num_heads == 0, "num_heads must divide hidden_dim");
  require(fusion_layers >= 0 && gka_layers >= 0 && decoder_layers >= 0,
          "layer counts must be non-negative");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(n_v >= 1 && n_t >= 1, "centroid counts must be positive");
  require(em_iterations >= 1, "em_iterations must be at least 1");
  require(lambda_rbf > 0.0, "lambda_rbf must be positive");
  require(omega > 0.0 && omega < 1.0, "omega must lie in (0, 1)");
  require(lambda_z >= 0.0, "lambda_z must be non-negative");
  require(conv_kernel >= 1 && conv_kernel % 2 == 1,
          "conv_kernel must be odd and positive");
  require(sal_dim >= 0, "sal_dim must be non-negative");
  require(margin_delta >= 0.0, "margin_delta must be non-negative");
  require(rank_tau > 0.0, "rank_tau must be positive");
  require(vld_tau > 0.0, "vld_tau must be positive");
  require(margin_pairs >= 1, "margin_pairs must be at least 1");
  require(bg_weight >= 0.0, "bg_weight must be non-negative");
  require(saliency_levels >= 1, "saliency_levels must be at least 1");
  require(good_saliency > 0.0 && good_saliency <= 1.0,
          "good_saliency must lie in (0, 1]");
}

TrainConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: expected JSON object");

  TrainConfig cfg;
  for (const auto& item : j.items()) {
    bool known = false;
    for_each_field(cfg, [&](const char* name, auto& field) {
      if (item.key() == name) {
        known = true;
        try {
          field = item.value().get<std::decay_t<decltype(field)>>();
        } catch (const json::exception&) {
          throw std::runtime_error("config: bad value type for key '" +
                                   item.key() + "'");
        }
      }
    });
    if (!known) {
      throw std::runtime_error("config: unknown key '" + item.key() + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json_text(const TrainConfig& cfg) {
  json j = json::object();
  for_each_field(const_cast<TrainConfig&>(cfg),
                 [&](const char* name, auto& field) { j[name] = field; });
  return j.dump(2) + "\n";
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_json_text(cfg);
}

}  // namespace uvcom
