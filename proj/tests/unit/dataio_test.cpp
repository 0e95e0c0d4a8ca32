// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvse/checkpoint.hpp"
#include "mvse/csv.hpp"
#include "mvse/dataset.hpp"
#include "mvse/error.hpp"
#include "mvse/export.hpp"
#include "mvse/random.hpp"
#include "mvse/synth.hpp"

namespace fs = std::filesystem;

namespace mvse {
namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("mvse_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string counts_json(std::size_t n, const std::string& first = "0") {
  std::string s = "[" + first;
  for (std::size_t i = 1; i < n; ++i) s += ",1";
  return s + "]";
}

ModelConfig small_config() {
  ModelConfig c = preset("EU8_GS32_OSM32");
  c.siren_widths = {8};
  c.gs_hidden = 4;
  c.osm_filters = {2, 2};
  c.fusion_width = 4;
  c.feature_dim = 3;
  return c;
}

// -- dataset -------------------------------------------------------------------

TEST(Dataset, LoadsThreeRecords) {
  std::istringstream in(
      R"({"id":"a","lon":4.7,"lat":50.9,"gs_features":[1,2,3],"osm_counts":)" + counts_json(222) + "}\n" +
      R"({"id":"b","lon":-3.5,"lat":40.1,"gs_features":[0,0,0],"aux":{"price":2.5}})" + "\n\n" +
      R"({"id":"c","lon":12,"lat":41,"osm_counts":)" + counts_json(222, "7") + "}\n");
  const auto recs = read_dataset(in);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].id, "a");
  EXPECT_EQ(recs[0].coordinate, Coordinate(4.7, 50.9));
  EXPECT_EQ(recs[0].osm_counts.size(), 222u);
  EXPECT_FALSE(recs[1].has_osm());
  EXPECT_EQ(recs[1].aux.at("price"), 2.5);
  EXPECT_FALSE(recs[2].has_gs());
  EXPECT_EQ(recs[2].osm_counts[0], 7.0);
  EXPECT_EQ(feature_width(recs), 3u);
}

TEST(Dataset, NegativeCountNamesLineAndField) {
  std::istringstream in(R"({"id":"a","lon":0,"lat":0})" "\n" R"({"id":"b","lon":0,"lat":0,"osm_counts":)" +
                        counts_json(222, "-1") + "}\n");
  try {
    read_dataset(in);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "osm_counts");
  }
}

TEST(Dataset, RejectsMalformedRecords) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {R"({"id":"a","lon":0})", "lat"},
      {R"({"id":"a","lon":190,"lat":0})", "lon"},
      {R"({"id":"a","lon":0,"lat":-91})", "lat"},
      {R"({"id":1,"lon":0,"lat":0})", "id"},
      {R"({"id":"a","lon":0,"lat":0,"osm_counts":[1,2]})", "osm_counts"},
      {R"({"id":"a","lon":0,"lat":0,"osm_counts":)" + counts_json(222, "0.5") + "}", "osm_counts"},
      {R"({"id":"a","lon":0,"lat":0,"gs_features":[]})", "gs_features"},
      {R"({"id":"a","lon":0,"lat":0,"colour":"red"})", "colour"},
      {R"({"id":"a","lon":0,"lat":0,"aux":{"price":"high"}})", "aux.price"},
      {R"([1,2])", "record"},
      {R"({"id":"a",)", "record"},
  };
  for (const auto& [text, field] : cases) {
    try {
      parse_record(text, 5);
      ADD_FAILURE() << text;
    } catch (const FormatError& e) {
      EXPECT_EQ(e.line(), 5u);
      EXPECT_EQ(e.field(), field) << text;
    }
  }
}

TEST(Dataset, InconsistentFeatureWidth) {
  std::istringstream in(R"({"id":"a","lon":0,"lat":0,"gs_features":[1,2]})" "\n"
                        R"({"id":"b","lon":0,"lat":0,"gs_features":[1,2,3]})" "\n");
  EXPECT_THROW(read_dataset(in), FormatError);
}

TEST(Dataset, ViewsCheckedAgainstConfig) {
  std::istringstream in(R"({"id":"a","lon":1,"lat":2,"osm_counts":)" + counts_json(222) + "}\n");
  const auto recs = read_dataset(in);
  EXPECT_NO_THROW(check_views(recs, preset("EU16_OSM16")));
  try {
    check_views(recs, preset("EU16_GS32_OSM16"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("GS features required by config 'EU16_GS32_OSM16' but missing"),
              std::string::npos)
        << e.what();
  }
}

TEST(Dataset, RoundTripIsExact) {
  const auto recs = synthesize_world({.seed = 3, .count = 20});
  TempDir dir;
  save_dataset(dir / "d.jsonl", recs);
  EXPECT_EQ(load_dataset(dir / "d.jsonl"), recs);
  std::ostringstream again;
  write_dataset(again, load_dataset(dir / "d.jsonl"));
  EXPECT_EQ(again.str(), slurp(dir / "d.jsonl"));
}

TEST(Dataset, FuzzedInputOnlyRaisesLibraryErrors) {
  const std::string seed_line = format_record(synthesize_world({.seed = 2, .count = 10})[0]);
  Rng rng(77);
  std::size_t accepted = 0;
  for (int i = 0; i < 3000; ++i) {
    std::string text = seed_line;
    const int edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = rng.below(text.size());
      switch (rng.below(3)) {
        case 0: text[pos] = static_cast<char>(rng.below(256)); break;
        case 1: text.erase(pos, 1 + rng.below(8)); break;
        default: text.insert(pos, 1, "{}[],:\"-0e9"[rng.below(11)]); break;
      }
    }
    try {
      parse_record(text, 1);
      ++accepted;
    } catch (const Error&) {
    } catch (...) {
      FAIL() << "non-library exception for input: " << text;
    }
  }
  EXPECT_LT(accepted, 3000u);
}

// -- checkpoint ----------------------------------------------------------------

TEST(Checkpoint, RoundTripPreservesBytesAndEmbeddings) {
  MultiViewModel m(small_config(), 4);
  const TrainingMetadata meta{.best_epoch = 12, .best_val_loss = 0.125, .seed = 99};
  TempDir dir;
  save_checkpoint(dir / "m.ckpt", m, meta);
  const auto ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.metadata, meta);
  EXPECT_EQ(ck.model.config(), m.config());
  EXPECT_TRUE(ck.model.parameters().same_values(m.parameters()));
  EXPECT_EQ(ck.model.normalization(), m.normalization());
  EXPECT_EQ(serialize_checkpoint(ck.model, ck.metadata), slurp(dir / "m.ckpt"));
  const Coordinate c(4.7, 50.9);
  const auto z = ck.model.location_encode(c);
  EXPECT_EQ(z.size(), 8u);
  EXPECT_EQ(z, m.location_encode(c));
  for (const auto& entry : fs::directory_iterator(dir.path())) EXPECT_EQ(entry.path().extension(), ".ckpt");
}

TEST(Checkpoint, DetectsTruncation) {
  MultiViewModel m(small_config(), 4);
  const std::string bytes = serialize_checkpoint(m, {});
  for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, len)), CheckpointError) << len;
  }
}

TEST(Checkpoint, DetectsBitFlips) {
  MultiViewModel m(small_config(), 4);
  const std::string bytes = serialize_checkpoint(m, {});
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::string bad = bytes;
    bad[rng.below(bad.size())] ^= static_cast<char>(1u << rng.below(8));
    EXPECT_THROW(deserialize_checkpoint(bad), CheckpointError);
  }
}

std::string with_crc(std::string body) {
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  char tail[4];
  for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>((crc >> (8 * i)) & 0xffu);
  body.append(tail, 4);
  return body;
}

TEST(Checkpoint, RejectsForeignMagicAndFutureVersion) {
  MultiViewModel m(small_config(), 4);
  std::string body = serialize_checkpoint(m, {});
  body.resize(body.size() - 4);
  ASSERT_EQ(with_crc(body), serialize_checkpoint(m, {}));

  std::string magic = body;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(with_crc(magic)), CheckpointError);

  std::string version = body;
  version[4] = 2;
  try {
    deserialize_checkpoint(with_crc(version));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingFile) {
  TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
}

// -- synthetic world -------------------------------------------------------------

TEST(Synth, DeterministicPerSeed) {
  EXPECT_EQ(synthesize_world({.seed = 5, .count = 50}), synthesize_world({.seed = 5, .count = 50}));
  EXPECT_NE(synthesize_world({.seed = 5, .count = 50}), synthesize_world({.seed = 6, .count = 50}));
}

TEST(Synth, RecordsCarryBothViewsAndLabels) {
  const WorldOptions opt{.seed = 8, .count = 2000, .regions = 5};
  const auto recs = synthesize_world(opt);
  ASSERT_EQ(recs.size(), 2000u);
  std::vector<std::size_t> per_region(5, 0);
  for (const auto& r : recs) {
    EXPECT_EQ(r.osm_counts.size(), 222u);
    EXPECT_EQ(r.gs_features.size(), 32u);
    EXPECT_GE(r.coordinate.lon(), -10.0);
    EXPECT_LE(r.coordinate.lon(), 40.0);
    EXPECT_GE(r.coordinate.lat(), 35.0);
    EXPECT_LE(r.coordinate.lat(), 70.0);
    const double region = r.aux.at("region");
    ASSERT_EQ(region, std::floor(region));
    ASSERT_LT(region, 5.0);
    ++per_region[static_cast<std::size_t>(region)];
    EXPECT_GT(r.aux.at("density"), 0.0);
  }
  for (auto n : per_region) EXPECT_GT(n, 0u);
  EXPECT_EQ(recs[0].id, "loc-000001");
}

TEST(Synth, CountsTrackTheLatentField) {
  const WorldOptions opt{.seed = 11, .count = 2000};
  const auto recs = synthesize_world(opt);
  const LatentField field(opt);
  std::vector<double> f, total;
  for (const auto& r : recs) {
    f.push_back(field(r.coordinate.lon(), r.coordinate.lat()));
    double s = 0;
    for (double c : r.osm_counts) s += c;
    total.push_back(s);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double mf = mean(f), mt = mean(total);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sxy += (f[i] - mf) * (total[i] - mt);
    sxx += (f[i] - mf) * (f[i] - mf);
    syy += (total[i] - mt) * (total[i] - mt);
  }
  EXPECT_GT(sxy / std::sqrt(sxx * syy), 0.5);
}

TEST(Synth, RejectsDegenerateWorlds) {
  EXPECT_THROW(synthesize_world({.count = 9}), InvalidArgument);
  EXPECT_THROW(synthesize_world({.count = 20, .regions = 1}), InvalidArgument);
  EXPECT_THROW(synthesize_world({.count = 20, .regions = 21}), InvalidArgument);
}

// -- CSV and embedding export ------------------------------------------------------

TEST(Csv, RealFormattingRoundTrips) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20.0);
    EXPECT_EQ(parse_real(format_real(v), 1, "x"), v);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_THROW(parse_real("0.1x", 3, "x"), FormatError);
  EXPECT_THROW(parse_real("", 3, "x"), FormatError);
}

TEST(Csv, TableRoundTripAndCellRules) {
  const CsvTable t{{"a", "b"}, {{"1", "2.5"}, {"-3", "4e-9"}}};
  std::ostringstream out;
  write_csv(out, t);
  std::istringstream in(out.str());
  const auto back = read_csv(in);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  const auto n = to_numeric(back);
  EXPECT_EQ(n.rows[1][1], 4e-9);
  std::ostringstream sink;
  EXPECT_THROW(write_csv(sink, CsvTable{{"a"}, {{"x,y"}}}), InvalidArgument);
}

TEST(Export, TenCoordinatesWithEightDimensions) {
  TempDir dir;
  {
    std::ofstream f(dir / "coords.csv");
    f << "id,lon,lat\n";
    for (int i = 0; i < 10; ++i) f << "p" << i << ',' << -5 + 4 * i << ',' << 40 + i << '\n';
  }
  MultiViewModel m(small_config(), 4);
  const auto coords = read_coordinates(dir / "coords.csv");
  ASSERT_EQ(coords.size(), 10u);
  export_embeddings(dir / "a.csv", m, coords);
  export_embeddings(dir / "b.csv", m, coords);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  const auto table = read_csv(dir / "a.csv");
  ASSERT_EQ(table.rows.size(), 10u);
  EXPECT_EQ(table.header.size(), 11u);
  EXPECT_EQ(table.header[3], "e_1");
  for (std::size_t i = 0; i < 10; ++i) {
    ASSERT_EQ(table.rows[i].size(), 11u);
    const auto z = m.location_encode(coords[i].coordinate);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(parse_real(table.rows[i][3 + k], 1, "e"), z[k]);
  }
}

TEST(Export, BadCoordinateFiles) {
  std::istringstream wrong_header("name,lon,lat\na,1,2\n");
  EXPECT_THROW(read_coordinates(wrong_header), FormatError);
  std::istringstream out_of_range("id,lon,lat\na,1,200\n");
  try {
    read_coordinates(out_of_range);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace mvse
