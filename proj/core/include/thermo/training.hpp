#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thermo/dataset.hpp"
#include "thermo/metrics.hpp"
#include "thermo/net.hpp"

namespace thermo {

struct TrainConfig {
  std::uint32_t batch_size = 128;
  std::uint32_t iterations = 5000;
  std::uint32_t checkpoint_every = 50;
  std::optional<std::uint32_t> burnin;  // default: iterations / 10
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double lambda_reg = 1e-2;
  GammaPrior prior;
  double epsilon = 0.01;  // posterior variance constant, inference only
  double dev_fraction = 0.8;
  std::uint64_t seed = 0;
  std::uint32_t hidden_dim = 256;

  std::uint32_t resolved_burnin() const {
    return burnin ? *burnin : iterations / 10;
  }
};

struct Checkpoint {
  ThermometerParams params;
  std::uint32_t iteration = 0;
  double validation_loss = 0.0;
};

struct TrainResult {
  ThermometerParams best;
  std::vector<Checkpoint> history;
  std::vector<double> iteration_losses;  // minibatch loss per iteration
};

// Full objective on the validation splits: per task, the temperature is the
// mean psi over the whole split, the contribution is the summed NLL minus
// lambda_reg * log Gamma(tau).
double validation_loss(const ThermometerParams& params,
                       const std::vector<TaskDataset>& val_tasks, double lambda_reg,
                       const GammaPrior& prior);

// Task-sampled minibatch training with burn-in, periodic checkpoints and
// validation-based selection. Deterministic in (tasks, cfg).
TrainResult train(const std::vector<TaskDataset>& tasks, const TrainConfig& cfg);

struct LooRow {
  std::string task;
  std::string method;  // vanilla | thermometer | ts | ts-cv
  CalibrationReport report;
};

struct LooResult {
  std::vector<LooRow> rows;
  // trained params per fold, indexed like tasks (fold i held out task i)
  std::vector<ThermometerParams> fold_params;
  std::vector<double> predicted_temperatures;  // per held-out task
};

// Train on K-1 tasks, predict the held-out temperature from features only,
// and report vanilla / thermometer / TS (label-cheating bound) / TS-CV rows.
LooResult run_leave_one_out(const std::vector<TaskDataset>& tasks,
                            const TrainConfig& cfg);

}  // namespace thermo
