// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited JSON dataset files. One record per line:
//
//   {"id": "...", "lon": 4.7, "lat": 50.9,
//    "osm_counts": [222 non-negative integers, cell-major],
//    "gs_features": [F reals],
//    "aux": {"region": 2, "density": 310.5, "price": 2.4}}
//
// osm_counts, gs_features and aux are optional. Blank lines are ignored.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvse/model_config.hpp"
#include "mvse/record.hpp"

namespace mvse {

inline constexpr std::size_t kOsmValues = 37 * kOsmChannels;

/// Parses one record. Throws FormatError naming `line` and the field.
LocationRecord parse_record(std::string_view text, std::size_t line);
std::string format_record(const LocationRecord& record);

std::vector<LocationRecord> read_dataset(std::istream& in);
std::vector<LocationRecord> load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, std::span<const LocationRecord> records);
void save_dataset(const std::filesystem::path& path, std::span<const LocationRecord> records);

/// Checks that every record carries the views `config` enables, with the
/// configured feature width. Throws ConfigError naming the missing view.
void check_views(std::span<const LocationRecord> records, const ModelConfig& config);

/// Common satellite feature width of the records, or 0 when none have any.
std::size_t feature_width(std::span<const LocationRecord> records);

}  // namespace mvse
