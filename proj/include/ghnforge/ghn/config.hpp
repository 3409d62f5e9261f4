#pragma once

#include <string>

namespace ghnforge {

enum class EdgeBiasMode { kGhn3, kGraphormer, kNone };

// Hypernetwork hyperparameters and ablation switches. Presets T/S/L/XL set
// (layers, hidden, heads); everything else keeps its default.
struct GhnConfig {
  int layers = 3;
  int hidden = 64;
  int heads = 8;
  int max_dist = 16;
  int max_degree = 16;

  bool use_sa = true;
  bool use_fw_edges = true;
  bool use_bw_edges = true;
  bool use_centrality = true;
  bool use_input_dist = true;

  int decoder_spatial = 16;
  int decoder_channel_mult = 1;  // 1, 2 or 4
  int decoder_hidden_mult = 2;   // decoder MLP expansion over `hidden`
  bool per_layer_edge_bias = false;

  void validate() const;  // throws ConfigError
  static GhnConfig preset(const std::string& name);  // "T", "S", "L", "XL"

  EdgeBiasMode edge_mode() const {
    if (use_fw_edges && use_bw_edges) return EdgeBiasMode::kGhn3;
    if (use_fw_edges) return EdgeBiasMode::kGraphormer;
    return EdgeBiasMode::kNone;
  }

  int dist_buckets() const { return max_dist + 2; }  // [0..max_dist] + unreachable
  int degree_buckets() const { return max_degree + 1; }
  int decoder_channels() const { return decoder_channel_mult * hidden; }
  int64_t decoder_out() const {
    int64_t cd = decoder_channels();
    return cd * cd * decoder_spatial * decoder_spatial;
  }

  std::string to_json() const;
  static GhnConfig from_json(const std::string& text);
};

}  // namespace ghnforge
