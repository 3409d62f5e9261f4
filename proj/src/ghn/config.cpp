#include "ghnforge/ghn/config.hpp"

#include <nlohmann/json.hpp>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

using json = nlohmann::json;

void GhnConfig::validate() const {
  if (layers < 1) throw ConfigError("ghn.layers must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    throw ConfigError("ghn.hidden must be a positive multiple of ghn.heads");
  if (max_dist < 1) throw ConfigError("ghn.max_dist must be >= 1");
  if (max_degree < 1) throw ConfigError("ghn.max_degree must be >= 1");
  if (decoder_spatial < 1) throw ConfigError("ghn.decoder_spatial must be >= 1");
  if (decoder_channel_mult != 1 && decoder_channel_mult != 2 && decoder_channel_mult != 4)
    throw ConfigError("ghn.decoder_channel_mult must be 1, 2 or 4");
  if (decoder_hidden_mult < 1) throw ConfigError("ghn.decoder_hidden_mult must be >= 1");
  if (use_bw_edges && !use_fw_edges)
    throw ConfigError("ghn.use_bw_edges requires ghn.use_fw_edges");
}

GhnConfig GhnConfig::preset(const std::string& name) {
  GhnConfig c;
  if (name == "T") {
    c.layers = 3;
    c.hidden = 64;
    c.heads = 8;
  } else if (name == "S") {
    c.layers = 5;
    c.hidden = 128;
    c.heads = 16;
  } else if (name == "L") {
    c.layers = 12;
    c.hidden = 256;
    c.heads = 16;
  } else if (name == "XL") {
    c.layers = 24;
    c.hidden = 384;
    c.heads = 16;
  } else {
    throw ConfigError("unknown GHN preset: '" + name + "' (expected T, S, L or XL)");
  }
  return c;
}

std::string GhnConfig::to_json() const {
  json j{{"layers", layers},
         {"hidden", hidden},
         {"heads", heads},
         {"max_dist", max_dist},
         {"max_degree", max_degree},
         {"use_sa", use_sa},
         {"use_fw_edges", use_fw_edges},
         {"use_bw_edges", use_bw_edges},
         {"use_centrality", use_centrality},
         {"use_input_dist", use_input_dist},
         {"decoder_spatial", decoder_spatial},
         {"decoder_channel_mult", decoder_channel_mult},
         {"decoder_hidden_mult", decoder_hidden_mult},
         {"per_layer_edge_bias", per_layer_edge_bias}};
  return j.dump();
}

GhnConfig GhnConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("GHN config parse error: ") + e.what());
  }
  GhnConfig c;
  c.layers = j.at("layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.heads = j.at("heads").get<int>();
  c.max_dist = j.at("max_dist").get<int>();
  c.max_degree = j.at("max_degree").get<int>();
  c.use_sa = j.at("use_sa").get<bool>();
  c.use_fw_edges = j.at("use_fw_edges").get<bool>();
  c.use_bw_edges = j.at("use_bw_edges").get<bool>();
  c.use_centrality = j.at("use_centrality").get<bool>();
  c.use_input_dist = j.at("use_input_dist").get<bool>();
  c.decoder_spatial = j.at("decoder_spatial").get<int>();
  c.decoder_channel_mult = j.at("decoder_channel_mult").get<int>();
  c.decoder_hidden_mult = j.at("decoder_hidden_mult").get<int>();
  c.per_layer_edge_bias = j.at("per_layer_edge_bias").get<bool>();
  return c;
}

}  // namespace ghnforge
