// SPDX-License-Identifier: Apache-2.0
#include "f3/federation/trainer.hpp"

#include <cmath>

#include "f3/numcore/errors.hpp"

namespace f3 {

namespace {

std::vector<Matrix> snapshot(const std::vector<Matrix*>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Matrix* p : params) out.push_back(*p);
  return out;
}

void restore(const std::vector<Matrix*>& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = values[i];
}

}  // namespace

TrainResult fit(Trainable& model, const EarlyStopping& cfg) {
  if (cfg.learning_rates.empty()) throw ValidationError("fit: no learning rates");
  if (cfg.max_epochs < 0 || cfg.patience < 1) throw ValidationError("fit: bad early-stopping settings");
  if (!model.fixed_lr.empty() && model.fixed_lr.size() != model.params.size())
    throw ContractError("fit: fixed_lr must be empty or match the parameter count");
  const std::vector<Matrix> start = snapshot(model.params);

  TrainResult best;
  std::vector<Matrix> best_params = start;
  bool have_best = false;

  for (double lr : cfg.learning_rates) {
    restore(model.params, start);
    // Adam is elementwise, so one optimizer per matrix is the same as a
    // single one when every rate agrees.
    std::vector<Adam> opts;
    opts.reserve(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      const bool fixed = !model.fixed_lr.empty() && model.fixed_lr[i].has_value();
      opts.emplace_back(AdamConfig{.lr = fixed ? *model.fixed_lr[i] : lr});
    }

    TrainResult run;
    run.lr = lr;
    run.val_loss.push_back(model.val_loss());
    run.best_val_loss = run.val_loss.back();
    std::vector<Matrix> run_best = start;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      Tape tape;
      std::vector<Var> vars;
      vars.reserve(model.params.size());
      for (Matrix* p : model.params) vars.push_back(tape.parameter(*p));
      const Var loss = model.train_loss(tape, vars, static_cast<std::uint64_t>(epoch));
      if (!std::isfinite(loss.value()[0])) {
        throw NumericError("fit: training loss became non-finite at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      for (std::size_t i = 0; i < vars.size(); ++i) {
        const Matrix g = tape.grad(vars[i]);
        opts[i].step(std::span<Matrix* const>(&model.params[i], 1), std::span<const Matrix>(&g, 1));
      }
      if (model.on_step) model.on_step();

      run.train_loss.push_back(loss.value()[0]);
      run.val_loss.push_back(model.val_loss());
      run.epochs_run = epoch;
      if (run.val_loss.back() < run.best_val_loss) {
        run.best_val_loss = run.val_loss.back();
        run.best_epoch = epoch;
        run_best = snapshot(model.params);
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
    if (!have_best || run.best_val_loss < best.best_val_loss) {
      best = std::move(run);
      best_params = std::move(run_best);
      have_best = true;
    }
  }
  restore(model.params, best_params);
  return best;
}

}  // namespace f3
