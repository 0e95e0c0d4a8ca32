// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvse/checkpoint.hpp"
#include "mvse/dataset.hpp"
#include "mvse/error.hpp"
#include "mvse/export.hpp"
#include "mvse/interpret.hpp"
#include "mvse/random.hpp"
#include "mvse/synth.hpp"
#include "mvse/train.hpp"

#ifndef MVSE_VERSION
#define MVSE_VERSION "unknown"
#endif

namespace mvse::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// MVSE_LOG: quiet, info (default) or debug.
enum class Level { Quiet, Info, Debug };

Level log_level() {
  const char* env = std::getenv("MVSE_LOG");
  if (env == nullptr) return Level::Info;
  const std::string v(env);
  if (v == "quiet") return Level::Quiet;
  if (v == "debug") return Level::Debug;
  return Level::Info;
}

void log(Level level, const std::string& msg) {
  if (level <= log_level()) std::cerr << msg << '\n';
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(utc_now()) { add("command", std::move(command)); }

  void add(const std::string& key, std::string value) {
    for (char& c : value)
      if (c == '\n' || c == '\r') c = ' ';
    entries_.emplace_back(key, std::move(value));
  }

  void write(const fs::path& output) {
    std::ostringstream out;
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    out << "tool_version=" << MVSE_VERSION << '\n';
    out << "start=" << start_ << '\n';
    out << "end=" << utc_now() << '\n';
    auto path = output;
    path += ".manifest";
    write_file_atomic(path, out.str());
  }

 private:
  std::string start_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string compact_config(const ModelConfig& c) { return nlohmann::json::parse(config_to_json(c)).dump(); }

const char* kind_name(FeatureKind k) { return k == FeatureKind::Raw ? "raw" : "embedding"; }

FeatureKind parse_kind(const std::string& s) {
  if (s == "raw") return FeatureKind::Raw;
  if (s == "embedding") return FeatureKind::Embedding;
  throw InvalidArgument("feature kind must be 'raw' or 'embedding', got '" + s + "'");
}

std::vector<double> labels_of(std::span<const LocationRecord> records, const std::string& label) {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) {
    const auto it = r.aux.find(label);
    if (it == r.aux.end()) throw InvalidArgument("record '" + r.id + "' has no label '" + label + "'");
    y.push_back(it->second);
  }
  return y;
}

ModelConfig resolve_config(const std::string& spec) {
  if (fs::is_regular_file(spec)) return config_from_json(read_text(spec));
  return preset(spec);
}

// -- synth -------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t count = 2000;
  std::size_t regions = 5;
  std::size_t features = 32;
  std::string out;
};

void cmd_synth(const SynthArgs& a) {
  Manifest m("synth");
  WorldOptions o;
  o.seed = a.seed;
  o.count = a.count;
  o.regions = a.regions;
  o.feature_dim = a.features;
  const auto records = synthesize_world(o);
  std::ostringstream out;
  write_dataset(out, records);
  write_file_atomic(a.out, out.str());
  m.add("seed", std::to_string(a.seed));
  m.add("count", std::to_string(a.count));
  m.add("regions", std::to_string(a.regions));
  m.add("features", std::to_string(a.features));
  m.add("output", a.out);
  m.write(a.out);
  log(Level::Info, "wrote " + std::to_string(records.size()) + " records to " + a.out);
}

// -- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config = "EU8_GS32_OSM32";
  std::string out;
  std::string log;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> patience;
};

void cmd_train(const TrainArgs& a) {
  Manifest m("train");
  const auto records = load_dataset(a.data);
  ModelConfig cfg = resolve_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.patience) cfg.patience = *a.patience;
  if (cfg.gs_enabled()) {
    if (const auto w = feature_width(records); w > 0) cfg.feature_dim = w;
  }
  check_views(records, cfg);

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ostringstream log_text;
  TrainOptions opt;
  opt.on_epoch = [&](const EpochLog& e) {
    write_log_line(log_text, e);
    log(Level::Debug, "epoch " + std::to_string(e.epoch) + " train " + format_real(e.train_loss) + " val " +
                          format_real(e.val_loss));
  };
  const auto result = train(records, cfg, opt);
  save_checkpoint(a.out, result.model, result.metadata);
  write_file_atomic(log_path, log_text.str());

  m.add("config", compact_config(cfg));
  m.add("seed", std::to_string(cfg.seed));
  m.add("data", a.data);
  m.add("output", a.out);
  m.add("log", log_path);
  m.add("best_epoch", std::to_string(result.metadata.best_epoch));
  m.add("best_val_loss", format_real(result.metadata.best_val_loss));
  m.write(a.out);
  log(Level::Info, "best epoch " + std::to_string(result.metadata.best_epoch) + ", validation loss " +
                       format_real(result.metadata.best_val_loss) + "; checkpoint " + a.out);
}

// -- embed -------------------------------------------------------------------

struct EmbedArgs {
  std::string checkpoint;
  std::string coords;
  std::string out;
};

void cmd_embed(const EmbedArgs& a) {
  Manifest m("embed");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto coords = read_coordinates(a.coords);
  export_embeddings(a.out, ckpt.model, coords);
  m.add("config", compact_config(ckpt.model.config()));
  m.add("seed", std::to_string(ckpt.metadata.seed));
  m.add("checkpoint", a.checkpoint);
  m.add("coords", a.coords);
  m.add("output", a.out);
  m.write(a.out);
  log(Level::Info, "embedded " + std::to_string(coords.size()) + " coordinates to " + a.out);
}

// -- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string label = "price";
  std::string task = "regression";
  std::string features = "embedding";
  std::vector<std::string> covariates;
  double lambda = 1e-3;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::optional<double> holdout_region;
  std::string out;
  std::string probe_out;
};

std::optional<Checkpoint> maybe_checkpoint(const std::string& path, FeatureKind kind) {
  if (kind == FeatureKind::Embedding && path.empty()) throw InvalidArgument("embedding features need --checkpoint");
  if (path.empty()) return std::nullopt;
  return load_checkpoint(path);
}

void cmd_eval(const EvalArgs& a) {
  Manifest m("eval");
  const auto kind = parse_kind(a.features);
  const auto records = load_dataset(a.data);
  const auto ckpt = maybe_checkpoint(a.checkpoint, kind);
  const auto x = build_features(records, kind, ckpt ? &ckpt->model : nullptr, a.covariates);
  const auto y = labels_of(records, a.label);

  std::vector<std::size_t> train_rows, test_rows;
  bool empty_side = false;
  if (a.holdout_region) {
    auto split = region_holdout_split(records, "region", *a.holdout_region);
    train_rows = std::move(split.outside);
    test_rows = std::move(split.inside);
    empty_side = split.empty_side;
  } else {
    if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) throw InvalidArgument("--test-fraction must be in (0, 1)");
    Rng rng(a.seed);
    const auto perm = rng.permutation(records.size());
    const auto n_test = static_cast<std::size_t>(std::llround(a.test_fraction * static_cast<double>(records.size())));
    test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    empty_side = train_rows.empty() || test_rows.empty();
  }
  if (train_rows.empty() || test_rows.empty()) throw InvalidArgument("evaluation split leaves one side empty");

  const auto xtr = x.select_rows(train_rows);
  const auto xte = x.select_rows(test_rows);
  std::vector<double> ytr, yte;
  for (auto i : train_rows) ytr.push_back(y[i]);
  for (auto i : test_rows) yte.push_back(y[i]);

  ProbeFile probe;
  probe.features = kind;
  probe.label = a.label;
  probe.covariates = a.covariates;
  json metrics;
  metrics["label"] = a.label;
  metrics["task"] = a.task;
  metrics["features"] = a.features;
  metrics["lambda"] = a.lambda;
  metrics["train_rows"] = train_rows.size();
  metrics["test_rows"] = test_rows.size();
  if (a.holdout_region) metrics["holdout_region"] = *a.holdout_region;
  metrics["empty_side"] = empty_side;
  if (a.task == "regression") {
    probe.model = ridge_fit(xtr, ytr, a.lambda);
    metrics["train_mse"] = mean_squared_error(probe.model.predict(xtr), ytr);
    metrics["test_mse"] = mean_squared_error(probe.model.predict(xte), yte);
  } else if (a.task == "classification") {
    auto to_int = [](const std::vector<double>& v) {
      std::vector<int> out;
      for (double d : v) {
        if (d != std::floor(d)) throw InvalidArgument("classification labels must be integers");
        out.push_back(static_cast<int>(d));
      }
      return out;
    };
    const auto ltr = to_int(ytr);
    const auto lte = to_int(yte);
    probe.model = logistic_fit(xtr, ltr, a.lambda);
    metrics["train_accuracy"] = accuracy(probe.model.predict(xtr), ltr);
    metrics["test_accuracy"] = accuracy(probe.model.predict(xte), lte);
  } else {
    throw InvalidArgument("--task must be 'regression' or 'classification'");
  }
  write_file_atomic(a.out, dump(metrics));
  if (!a.probe_out.empty()) save_probe(a.probe_out, probe);

  m.add("seed", std::to_string(a.seed));
  m.add("data", a.data);
  m.add("checkpoint", a.checkpoint);
  if (ckpt) m.add("config", compact_config(ckpt->model.config()));
  m.add("output", a.out);
  if (!a.probe_out.empty()) m.add("probe", a.probe_out);
  m.write(a.out);
  log(Level::Info, metrics.dump());
}

// -- vip / pdp ---------------------------------------------------------------

struct VipArgs {
  std::string probe;
  std::string checkpoint;
  std::string data;
  std::string group = "location";
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_vip(const VipArgs& a) {
  Manifest m("vip");
  const auto probe = load_probe(a.probe);
  const auto records = load_dataset(a.data);
  const auto ckpt = maybe_checkpoint(a.checkpoint, probe.features);
  const auto x = build_features(records, probe.features, ckpt ? &ckpt->model : nullptr, probe.covariates);
  const double value = permutation_importance(probe.model, x, a.group, a.seed, a.repeats);
  json report;
  report["group"] = a.group;
  report["value"] = value;
  report["repeats"] = a.repeats;
  report["seed"] = a.seed;
  write_file_atomic(a.out, dump(report));
  m.add("seed", std::to_string(a.seed));
  m.add("probe", a.probe);
  m.add("data", a.data);
  m.add("checkpoint", a.checkpoint);
  m.add("output", a.out);
  m.write(a.out);
  log(Level::Info, report.dump());
}

struct PdpArgs {
  std::string probe;
  std::string checkpoint;
  std::string data;
  std::string grid;
  std::string out;
};

void cmd_pdp(const PdpArgs& a) {
  Manifest m("pdp");
  const auto probe = load_probe(a.probe);
  const auto records = load_dataset(a.data);
  const auto ckpt = maybe_checkpoint(a.checkpoint, probe.features);
  const MultiViewModel* model = ckpt ? &ckpt->model : nullptr;
  const auto x = build_features(records, probe.features, model, probe.covariates);
  const auto named = read_coordinates(a.grid);
  std::vector<Coordinate> grid;
  for (const auto& n : named) grid.push_back(n.coordinate);
  Embedder embedder;
  if (probe.features == FeatureKind::Embedding) {
    embedder = [model](const Coordinate& c) { return model->location_encode(c); };
  }
  const auto points = partial_dependence(probe.model, x, "location", grid, embedder);
  emit_plot_data(pd_table(points), a.out);
  m.add("probe", a.probe);
  m.add("data", a.data);
  m.add("checkpoint", a.checkpoint);
  m.add("grid", a.grid);
  m.add("output", a.out);
  m.write(a.out);
  log(Level::Info, "wrote " + std::to_string(points.size()) + " partial-dependence rows to " + a.out);
}

}  // namespace

FeatureMatrix build_features(std::span<const LocationRecord> records, FeatureKind kind, const MultiViewModel* model,
                             std::span<const std::string> covariates) {
  if (kind == FeatureKind::Embedding && model == nullptr) throw InvalidArgument("embedding features need a model");
  std::vector<std::string> cols;
  std::size_t width = 2;
  if (kind == FeatureKind::Raw) {
    cols = {"lon", "lat"};
  } else {
    width = model->config().embed_dim;
    for (std::size_t k = 1; k <= width; ++k) cols.push_back("e_" + std::to_string(k));
  }
  for (const auto& c : covariates) cols.push_back(c);
  FeatureMatrix x(records.size(), cols);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (kind == FeatureKind::Raw) {
      x.at(i, 0) = r.coordinate.lon();
      x.at(i, 1) = r.coordinate.lat();
    } else {
      const auto z = model->location_encode(r.coordinate);
      for (std::size_t k = 0; k < width; ++k) x.at(i, k) = z[k];
    }
    for (std::size_t c = 0; c < covariates.size(); ++c) {
      const auto it = r.aux.find(covariates[c]);
      if (it == r.aux.end()) throw InvalidArgument("record '" + r.id + "' has no covariate '" + covariates[c] + "'");
      x.at(i, width + c) = it->second;
    }
  }
  std::vector<std::size_t> loc(width);
  for (std::size_t k = 0; k < width; ++k) loc[k] = k;
  x.add_group("location", loc);
  for (std::size_t c = 0; c < covariates.size(); ++c) x.add_group(covariates[c], {width + c});
  return x;
}

void save_probe(const std::filesystem::path& path, const ProbeFile& p) {
  json j;
  j["kind"] = p.model.kind == ProbeKind::Ridge ? "ridge" : "logistic";
  j["features"] = kind_name(p.features);
  j["label"] = p.label;
  j["covariates"] = p.covariates;
  j["lambda"] = p.model.lambda;
  j["coefficients"] = p.model.coefficients;
  j["intercept"] = p.model.intercept;
  j["classes"] = p.model.classes;
  write_file_atomic(path, dump(j));
}

ProbeFile load_probe(const std::filesystem::path& path) {
  ProbeFile p;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "ridge" && kind != "logistic") throw InvalidArgument("unknown probe kind '" + kind + "'");
    p.model.kind = kind == "ridge" ? ProbeKind::Ridge : ProbeKind::Logistic;
    p.features = parse_kind(j.at("features").get<std::string>());
    p.label = j.value("label", "");
    p.covariates = j.value("covariates", std::vector<std::string>{});
    p.model.lambda = j.value("lambda", 0.0);
    p.model.coefficients = j.at("coefficients").get<std::vector<std::vector<double>>>();
    p.model.intercept = j.at("intercept").get<std::vector<double>>();
    p.model.classes = j.value("classes", std::vector<int>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(1, "probe", std::string("invalid probe file ") + path.string() + ": " + e.what());
  }
  const auto& m = p.model;
  const std::size_t outputs = m.kind == ProbeKind::Ridge ? 1 : m.classes.size();
  if (m.coefficients.size() != outputs || m.intercept.size() != outputs || outputs == 0) {
    throw FormatError(1, "coefficients", "probe coefficient and intercept counts do not match");
  }
  for (const auto& row : m.coefficients) {
    if (row.size() != m.coefficients.front().size()) throw FormatError(1, "coefficients", "ragged coefficient rows");
  }
  return p;
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-view contrastive spatial embeddings"};
  app.set_version_flag("--version", MVSE_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--count", synth.count, "Number of locations (>= 10)");
  s->add_option("--regions", synth.regions, "Number of Voronoi regions (>= 2)");
  s->add_option("--features", synth.features, "Satellite feature width");
  s->add_option("--out", synth.out, "Output dataset (JSON lines)")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--data", tr.data, "Dataset (JSON lines)")->required();
  t->add_option("--config", tr.config, "Preset name or JSON config file");
  t->add_option("--out", tr.out, "Output checkpoint")->required();
  t->add_option("--log", tr.log, "Training log (default <out>.log.jsonl)");
  t->add_option("--epochs", tr.epochs, "Override epoch limit");
  t->add_option("--seed", tr.seed, "Override seed");
  t->add_option("--lr", tr.lr, "Override learning rate");
  t->add_option("--batch-size", tr.batch_size, "Override batch size");
  t->add_option("--patience", tr.patience, "Override early-stopping patience");

  EmbedArgs em;
  auto* e = app.add_subcommand("embed", "Embed coordinates with a checkpoint");
  e->add_option("--checkpoint", em.checkpoint)->required();
  e->add_option("--coords", em.coords, "CSV with id,lon,lat")->required();
  e->add_option("--out", em.out, "Output CSV")->required();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Fit and score a linear probe");
  v->add_option("--checkpoint", ev.checkpoint, "Checkpoint (needed for embedding features)");
  v->add_option("--data", ev.data)->required();
  v->add_option("--label", ev.label, "Aux label to predict");
  v->add_option("--task", ev.task, "regression or classification");
  v->add_option("--features", ev.features, "raw or embedding");
  v->add_option("--covariate", ev.covariates, "Extra aux columns used as features");
  v->add_option("--lambda", ev.lambda, "Regularisation strength");
  v->add_option("--test-fraction", ev.test_fraction, "Random test share");
  v->add_option("--seed", ev.seed, "Split seed");
  v->add_option("--holdout-region", ev.holdout_region, "Test on this region, train on the rest");
  v->add_option("--out", ev.out, "Metrics JSON")->required();
  v->add_option("--probe-out", ev.probe_out, "Write the fitted probe here");

  VipArgs vp;
  auto* vi = app.add_subcommand("vip", "Grouped permutation importance of a probe");
  vi->add_option("--probe", vp.probe)->required();
  vi->add_option("--checkpoint", vp.checkpoint);
  vi->add_option("--data", vp.data)->required();
  vi->add_option("--group", vp.group);
  vi->add_option("--repeats", vp.repeats);
  vi->add_option("--seed", vp.seed);
  vi->add_option("--out", vp.out, "Report JSON")->required();

  PdpArgs pd;
  auto* p = app.add_subcommand("pdp", "Partial dependence of a probe over locations");
  p->add_option("--probe", pd.probe)->required();
  p->add_option("--checkpoint", pd.checkpoint);
  p->add_option("--data", pd.data)->required();
  p->add_option("--grid", pd.grid, "CSV with id,lon,lat")->required();
  p->add_option("--out", pd.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code;
  }

  try {
    if (*s) cmd_synth(synth);
    if (*t) cmd_train(tr);
    if (*e) cmd_embed(em);
    if (*v) cmd_eval(ev);
    if (*vi) cmd_vip(vp);
    if (*p) cmd_pdp(pd);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"mvse"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mvse::cli
