// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mvse/adam.hpp"
#include "mvse/encoders.hpp"
#include "mvse/record.hpp"

namespace mvse {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Random 90/10 partition of record indices: ceil(0.9 * count) training
/// indices, the rest for validation. Needs at least 10 records.
Split split_dataset(std::size_t count, std::uint64_t seed);

/// Constant input tensors for one minibatch. Absent views stay empty.
struct Batch {
  Tensor basis;
  Tensor gs;
  Tensor osm;
  std::size_t size = 0;
};

Batch make_batch(const MultiViewModel& model, std::span<const LocationRecord> records,
                 std::span<const std::size_t> indices);

/// Location and multi-view embeddings of a batch, recorded on `tape`.
struct BatchOutputs {
  ad::Var location;
  ad::Var views;
};
BatchOutputs forward_batch(const MultiViewModel& model, ad::Tape& tape, const Batch& batch);

/// Contrastive loss of one batch, on `tape`.
ad::Var batch_loss(const MultiViewModel& model, ad::Tape& tape, const Batch& batch);

/// Batch-size-weighted mean loss over consecutive batches of `batch_size`;
/// batches of one record carry no contrastive signal and are skipped.
double evaluate_loss(const MultiViewModel& model, std::span<const LocationRecord> records,
                     std::span<const std::size_t> indices, std::size_t batch_size);

/// [N, d] multi-view embeddings of the given records.
Tensor view_embeddings(const MultiViewModel& model, std::span<const LocationRecord> records,
                       std::span<const std::size_t> indices);

/// Mean top-1 retrieval accuracy over consecutive full batches of
/// `batch_size` drawn from `indices` in order.
double retrieval_accuracy(const MultiViewModel& model, std::span<const LocationRecord> records,
                          std::span<const std::size_t> indices, std::size_t batch_size);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double elapsed_seconds = 0.0;
  bool improved = false;
};

/// One JSON object per line: epoch, train_loss, val_loss, elapsed_seconds.
void write_log_line(std::ostream& out, const EpochLog& entry);

struct TrainingMetadata {
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct TrainState {
  std::size_t epoch = 0;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_without_improvement = 0;
  AdamState adam;
};

struct TrainOptions {
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  MultiViewModel model;  // parameters of the best validation epoch
  TrainingMetadata metadata;
  Split split;
  std::vector<EpochLog> history;
};

/// Minibatch contrastive training with Adam and early stopping on the
/// validation loss. Training stops once the number of consecutive
/// non-improving epochs exceeds `config.patience`, or at `config.epochs`.
/// Throws TrainingError naming the batch when a loss or gradient is not
/// finite.
TrainResult train(std::span<const LocationRecord> records, const ModelConfig& config,
                  const TrainOptions& options = {});

}  // namespace mvse
