// SPDX-License-Identifier: Apache-2.0
#include "mvse/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "mvse/contrastive.hpp"
#include "mvse/dataset.hpp"
#include "mvse/error.hpp"
#include "mvse/random.hpp"

namespace mvse {

namespace {

// Separate streams for the split and the batch order.
constexpr std::uint64_t kSplitStream = 0x5bd1e995u;
constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15u;

bool grads_finite(const ad::ParameterSet& params) {
  return std::all_of(params.begin(), params.end(), [](const auto& p) { return p->grad.all_finite(); });
}

}  // namespace

Split split_dataset(std::size_t count, std::uint64_t seed) {
  if (count < 10) throw InvalidArgument("split_dataset needs at least 10 records, got " + std::to_string(count));
  Rng rng(seed ^ kSplitStream);
  auto perm = rng.permutation(count);
  const std::size_t n_train = (9 * count + 9) / 10;
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return s;
}

Batch make_batch(const MultiViewModel& model, std::span<const LocationRecord> records,
                 std::span<const std::size_t> indices) {
  const auto& cfg = model.config();
  Batch b;
  b.size = indices.size();
  std::vector<Coordinate> coords;
  std::vector<const std::vector<double>*> gs;
  std::vector<const std::vector<double>*> osm;
  coords.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& r = records[i];
    coords.push_back(r.coordinate);
    if (cfg.gs_enabled()) gs.push_back(&r.gs_features);
    if (cfg.osm_enabled()) osm.push_back(&r.osm_counts);
  }
  b.basis = model.location_inputs(coords);
  if (cfg.gs_enabled()) b.gs = model.gs_inputs(gs);
  if (cfg.osm_enabled()) b.osm = model.osm_inputs(osm);
  return b;
}

BatchOutputs forward_batch(const MultiViewModel& model, ad::Tape& tape, const Batch& batch) {
  const auto& cfg = model.config();
  std::optional<ad::Var> gs;
  std::optional<ad::Var> osm;
  if (cfg.gs_enabled()) gs = model.gs_forward(tape, batch.gs);
  if (cfg.osm_enabled()) osm = model.osm_forward(tape, batch.osm);
  return {model.location_forward(tape, batch.basis), model.fusion_forward(tape, gs, osm)};
}

ad::Var batch_loss(const MultiViewModel& model, ad::Tape& tape, const Batch& batch) {
  const auto out = forward_batch(model, tape, batch);
  return contrastive_loss(out.location, out.views, model.config().temperature);
}

double evaluate_loss(const MultiViewModel& model, std::span<const LocationRecord> records,
                     std::span<const std::size_t> indices, std::size_t batch_size) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    if (chunk.size() < 2) continue;
    ad::Tape tape({.record_gradients = false, .trap_non_finite = model.config().trap_non_finite});
    total += batch_loss(model, tape, make_batch(model, records, chunk)).value().item() * static_cast<double>(chunk.size());
    counted += chunk.size();
  }
  if (counted == 0) throw InvalidArgument("evaluate_loss needs at least two records");
  return total / static_cast<double>(counted);
}

Tensor view_embeddings(const MultiViewModel& model, std::span<const LocationRecord> records,
                       std::span<const std::size_t> indices) {
  ad::Tape tape({.record_gradients = false, .trap_non_finite = model.config().trap_non_finite});
  return forward_batch(model, tape, make_batch(model, records, indices)).views.value();
}

double retrieval_accuracy(const MultiViewModel& model, std::span<const LocationRecord> records,
                          std::span<const std::size_t> indices, std::size_t batch_size) {
  if (batch_size == 0 || batch_size > indices.size()) {
    throw InvalidArgument("retrieval batch size " + std::to_string(batch_size) + " must be in [1, " +
                          std::to_string(indices.size()) + "]");
  }
  double sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start + batch_size <= indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, batch_size);
    ad::Tape tape({.record_gradients = false, .trap_non_finite = model.config().trap_non_finite});
    const auto out = forward_batch(model, tape, make_batch(model, records, chunk));
    sum += top1_retrieval(out.location.value(), out.views.value());
    ++batches;
  }
  return sum / static_cast<double>(batches);
}

void write_log_line(std::ostream& out, const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_loss"] = e.val_loss;
  j["elapsed_seconds"] = e.elapsed_seconds;
  out << j.dump() << '\n';
}

TrainResult train(std::span<const LocationRecord> records, const ModelConfig& config, const TrainOptions& options) {
  config.validate();
  check_views(records, config);
  if (config.batch_size < 2) throw ConfigError("batch_size must be at least 2");

  Split split = split_dataset(records.size(), config.seed);
  MultiViewModel model(config, config.seed);
  {
    std::vector<LocationRecord> train_records;
    train_records.reserve(split.train.size());
    for (std::size_t i : split.train) train_records.push_back(records[i]);
    model.set_normalization(InputNormalization::fit(train_records, config));
  }

  TrainState state;
  state.adam.options.lr = config.learning_rate;
  state.adam.options.weight_decay = config.weight_decay;
  ad::ParameterSet best = model.parameters().clone();

  Rng shuffle(config.seed ^ kShuffleStream);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<EpochLog> history;

  for (state.epoch = 1; state.epoch <= config.epochs; ++state.epoch) {
    const auto perm = shuffle.permutation(split.train.size());
    std::vector<std::size_t> order(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) order[i] = split.train[perm[i]];

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const auto chunk = std::span(order).subspan(start, std::min(config.batch_size, order.size() - start));
      if (chunk.size() < 2) continue;
      try {
        ad::Tape tape({.record_gradients = true, .trap_non_finite = config.trap_non_finite});
        tape.bind(model.parameters());
        model.parameters().zero_grad();
        const auto loss = batch_loss(model, tape, make_batch(model, records, chunk));
        const double value = loss.value().item();
        if (!std::isfinite(value)) throw NumericError("contrastive_loss");
        tape.backward(loss);
        if (!grads_finite(model.parameters())) throw NumericError("backward", "non-finite gradient");
        adam_step(model.parameters(), state.adam);
        loss_sum += value * static_cast<double>(chunk.size());
        loss_count += chunk.size();
      } catch (const NumericError& e) {
        throw TrainingError(state.epoch, batch_index, e.what());
      }
    }

    EpochLog entry;
    entry.epoch = state.epoch;
    entry.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    try {
      entry.val_loss = evaluate_loss(model, records, split.validation, config.batch_size);
    } catch (const NumericError& e) {
      throw TrainingError(state.epoch, 0, std::string("validation: ") + e.what());
    }
    entry.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entry.improved = state.best_epoch == 0 || entry.val_loss < state.best_val_loss;
    if (entry.improved) {
      state.best_val_loss = entry.val_loss;
      state.best_epoch = state.epoch;
      state.epochs_without_improvement = 0;
      best.assign_values(model.parameters());
    } else {
      ++state.epochs_without_improvement;
    }
    history.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);
    if (state.epochs_without_improvement > config.patience) break;
  }

  model.parameters().assign_values(best);
  model.parameters().zero_grad();
  TrainingMetadata meta{state.best_epoch, state.best_val_loss, config.seed};
  return {std::move(model), meta, std::move(split), std::move(history)};
}

}  // namespace mvse
