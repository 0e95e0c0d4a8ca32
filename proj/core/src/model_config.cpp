// SPDX-License-Identifier: Apache-2.0
#include "mvse/model_config.hpp"

#include <json.hpp>

#include "mvse/error.hpp"

namespace mvse {

void ModelConfig::validate() const {
  if (sh_degree < 0) throw ConfigError("sh_degree must be non-negative");
  if (embed_dim == 0) throw ConfigError("embedding dimension d must be positive");
  if (gs_dim + osm_dim == 0) throw ConfigError("at least one view must be enabled (d_GS + d_OSM > 0)");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (siren_widths.empty()) throw ConfigError("siren needs at least one hidden layer");
  for (auto w : siren_widths)
    if (w == 0) throw ConfigError("siren widths must be positive");
  if (!(siren_omega0 > 0.0)) throw ConfigError("siren omega0 must be positive");
  if (gs_enabled() && (feature_dim == 0 || gs_hidden == 0)) throw ConfigError("satellite feature and hidden widths must be positive");
  if (osm_enabled()) {
    if (osm_filters.empty()) throw ConfigError("osm encoder needs at least one convolution");
    for (auto f : osm_filters)
      if (f == 0) throw ConfigError("osm filter counts must be positive");
    if (osm_filter_rings < 0 || osm_filter_rings > kOsmRings) throw ConfigError("osm filter rings out of range");
  }
  if (fusion_width == 0) throw ConfigError("fusion width must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs == 0) throw ConfigError("epochs must be positive");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"EU8_GS32_OSM32", "EU16_GS32_OSM16", "EU16_OSM16", "EU32_GS96_OSM32",
                                              "EU64_GS64"};
  return names;
}

ModelConfig preset(std::string_view name) {
  struct Row {
    std::string_view name;
    std::size_t d, gs, osm;
  };
  static constexpr Row rows[] = {
      {"EU8_GS32_OSM32", 8, 32, 32},   {"EU16_GS32_OSM16", 16, 32, 16}, {"EU16_OSM16", 16, 0, 16},
      {"EU32_GS96_OSM32", 32, 96, 32}, {"EU64_GS64", 64, 64, 0},
  };
  for (const auto& r : rows) {
    if (r.name == name) {
      ModelConfig c;
      c.name = std::string(r.name);
      c.embed_dim = r.d;
      c.gs_dim = r.gs;
      c.osm_dim = r.osm;
      return c;
    }
  }
  throw ConfigError("unknown preset: " + std::string(name));
}

namespace {

using nlohmann::json;

json to_json_value(const ModelConfig& c) {
  return json{{"name", c.name},
              {"sh_degree", c.sh_degree},
              {"siren_widths", c.siren_widths},
              {"siren_omega0", c.siren_omega0},
              {"embed_dim", c.embed_dim},
              {"gs_dim", c.gs_dim},
              {"osm_dim", c.osm_dim},
              {"feature_dim", c.feature_dim},
              {"gs_hidden", c.gs_hidden},
              {"osm_filters", c.osm_filters},
              {"osm_filter_rings", c.osm_filter_rings},
              {"fusion_width", c.fusion_width},
              {"temperature", c.temperature},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"patience", c.patience},
              {"seed", c.seed},
              {"trap_non_finite", c.trap_non_finite}};
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return to_json_value(config).dump(2); }

ModelConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c;
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("config field 'preset' must be a string");
    c = preset(j["preset"].get<std::string>());
  }
  static const char* known[] = {"preset", "name", "sh_degree", "siren_widths", "siren_omega0", "embed_dim", "gs_dim",
                                "osm_dim", "feature_dim", "gs_hidden", "osm_filters", "osm_filter_rings",
                                "fusion_width", "temperature", "learning_rate", "weight_decay", "epochs",
                                "batch_size", "patience", "seed", "trap_non_finite"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config field: " + key);
  }
  read(j, "name", c.name);
  read(j, "sh_degree", c.sh_degree);
  read(j, "siren_widths", c.siren_widths);
  read(j, "siren_omega0", c.siren_omega0);
  read(j, "embed_dim", c.embed_dim);
  read(j, "gs_dim", c.gs_dim);
  read(j, "osm_dim", c.osm_dim);
  read(j, "feature_dim", c.feature_dim);
  read(j, "gs_hidden", c.gs_hidden);
  read(j, "osm_filters", c.osm_filters);
  read(j, "osm_filter_rings", c.osm_filter_rings);
  read(j, "fusion_width", c.fusion_width);
  read(j, "temperature", c.temperature);
  read(j, "learning_rate", c.learning_rate);
  read(j, "weight_decay", c.weight_decay);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "patience", c.patience);
  read(j, "seed", c.seed);
  read(j, "trap_non_finite", c.trap_non_finite);
  return c;
}

}  // namespace mvse
