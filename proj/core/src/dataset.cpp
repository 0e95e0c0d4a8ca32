// SPDX-License-Identifier: Apache-2.0
#include "mvse/dataset.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mvse/error.hpp"

namespace mvse {

namespace {

using json = nlohmann::json;

constexpr double kMaxCount = 1e15;

double number(const json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw FormatError(line, field, "missing");
  if (!it->is_number()) throw FormatError(line, field, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw FormatError(line, field, "not finite");
  return v;
}

std::vector<double> number_array(const json& value, const char* field, std::size_t line) {
  if (!value.is_array()) throw FormatError(line, field, "expected an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) throw FormatError(line, field, "element " + std::to_string(out.size()) + " is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError(line, field, "element " + std::to_string(out.size()) + " is not finite");
    out.push_back(x);
  }
  return out;
}

}  // namespace

LocationRecord parse_record(std::string_view text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(line, "record", std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw FormatError(line, "record", "expected an object");

  LocationRecord r;
  const auto id = obj.find("id");
  if (id == obj.end()) throw FormatError(line, "id", "missing");
  if (!id->is_string()) throw FormatError(line, "id", "expected a string");
  r.id = id->get<std::string>();

  const double lon = number(obj, "lon", line);
  const double lat = number(obj, "lat", line);
  if (lon < -180.0 || lon > 180.0) throw FormatError(line, "lon", "out of range [-180, 180]");
  if (lat < -90.0 || lat > 90.0) throw FormatError(line, "lat", "out of range [-90, 90]");
  r.coordinate = Coordinate(lon, lat);

  if (const auto it = obj.find("osm_counts"); it != obj.end()) {
    r.osm_counts = number_array(*it, "osm_counts", line);
    if (r.osm_counts.size() != kOsmValues) {
      throw FormatError(line, "osm_counts", "expected " + std::to_string(kOsmValues) + " values, got " +
                                                std::to_string(r.osm_counts.size()));
    }
    for (std::size_t i = 0; i < r.osm_counts.size(); ++i) {
      const double c = r.osm_counts[i];
      if (c < 0.0) throw FormatError(line, "osm_counts", "negative count at index " + std::to_string(i));
      if (c != std::floor(c)) throw FormatError(line, "osm_counts", "non-integer count at index " + std::to_string(i));
      if (c > kMaxCount) throw FormatError(line, "osm_counts", "count too large at index " + std::to_string(i));
    }
  }
  if (const auto it = obj.find("gs_features"); it != obj.end()) {
    r.gs_features = number_array(*it, "gs_features", line);
    if (r.gs_features.empty()) throw FormatError(line, "gs_features", "empty array");
  }
  if (const auto it = obj.find("aux"); it != obj.end()) {
    if (!it->is_object()) throw FormatError(line, "aux", "expected an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number()) throw FormatError(line, "aux." + key, "expected a number");
      const double v = value.get<double>();
      if (!std::isfinite(v)) throw FormatError(line, "aux." + key, "not finite");
      r.aux.emplace(key, v);
    }
  }
  for (const auto& [key, value] : obj.items()) {
    if (key != "id" && key != "lon" && key != "lat" && key != "osm_counts" && key != "gs_features" && key != "aux") {
      throw FormatError(line, key, "unknown field");
    }
  }
  return r;
}

std::string format_record(const LocationRecord& r) {
  // ordered_json keeps the documented field order in the output.
  nlohmann::ordered_json obj;
  obj["id"] = r.id;
  obj["lon"] = r.coordinate.lon();
  obj["lat"] = r.coordinate.lat();
  if (r.has_osm()) {
    auto& counts = obj["osm_counts"] = nlohmann::ordered_json::array();
    for (double c : r.osm_counts) counts.push_back(static_cast<std::int64_t>(c));
  }
  if (r.has_gs()) obj["gs_features"] = r.gs_features;
  if (!r.aux.empty()) {
    auto& aux = obj["aux"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.aux) aux[k] = v;
  }
  return obj.dump();
}

std::vector<LocationRecord> read_dataset(std::istream& in) {
  std::vector<LocationRecord> out;
  std::string text;
  std::size_t line = 0;
  std::size_t width = 0;
  std::size_t width_line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    auto r = parse_record(text, line);
    if (r.has_gs()) {
      if (width == 0) {
        width = r.gs_features.size();
        width_line = line;
      } else if (r.gs_features.size() != width) {
        throw FormatError(line, "gs_features", "width " + std::to_string(r.gs_features.size()) + " differs from " +
                                                   std::to_string(width) + " on line " + std::to_string(width_line));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LocationRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_dataset(std::ostream& out, std::span<const LocationRecord> records) {
  for (const auto& r : records) out << format_record(r) << '\n';
}

void save_dataset(const std::filesystem::path& path, std::span<const LocationRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset " + path.string());
  write_dataset(out, records);
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

void check_views(std::span<const LocationRecord> records, const ModelConfig& config) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "record " + std::to_string(i + 1) + " ('" + r.id + "')";
    if (config.gs_enabled()) {
      if (!r.has_gs()) throw ConfigError(where + ": GS features required by config '" + config.name + "' but missing");
      if (r.gs_features.size() != config.feature_dim) {
        throw ConfigError(where + ": GS feature width " + std::to_string(r.gs_features.size()) +
                          " does not match config width " + std::to_string(config.feature_dim));
      }
    }
    if (config.osm_enabled() && !r.has_osm()) {
      throw ConfigError(where + ": OSM counts required by config '" + config.name + "' but missing");
    }
  }
}

std::size_t feature_width(std::span<const LocationRecord> records) {
  for (const auto& r : records)
    if (r.has_gs()) return r.gs_features.size();
  return 0;
}

}  // namespace mvse
