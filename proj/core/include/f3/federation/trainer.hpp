// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "f3/numcore/adam.hpp"
#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

struct EarlyStopping {
  int max_epochs = 500;
  int patience = 50;
  std::vector<double> learning_rates{0.01, 0.001};
};

/// What the trainer needs from a model: its parameter matrices, a training
/// loss recorded on a tape for a given step, and a validation loss on the
/// current parameter values.
struct Trainable {
  std::vector<Matrix*> params;
  /// Per-parameter rate that overrides the candidate rate (edge logits, VFL
  /// local encoders). Empty, or one entry per parameter.
  std::vector<std::optional<double>> fixed_lr;
  std::function<Var(Tape&, std::span<const Var>, std::uint64_t step)> train_loss;
  std::function<double()> val_loss;
  /// Called after each optimizer step (transfer accounting).
  std::function<void()> on_step;
};

struct TrainResult {
  double lr = 0.0;
  double best_val_loss = 0.0;
  int epochs_run = 0;      // optimizer steps taken with the chosen rate
  int best_epoch = 0;
  std::vector<double> train_loss;  // chosen rate only
  std::vector<double> val_loss;    // chosen rate only; entry 0 is before training
};

/// Full-batch Adam with early stopping on validation loss, repeated for each
/// candidate learning rate from the same starting point. Leaves the params at
/// the best validation checkpoint of the best rate (ties: earlier rate).
TrainResult fit(Trainable& model, const EarlyStopping& cfg);

}  // namespace f3
