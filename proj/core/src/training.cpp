#include "thermo/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "thermo/inference.hpp"
#include "thermo/rng.hpp"
#include "thermo/scaling.hpp"

namespace thermo {
namespace {

double task_objective(const ThermometerParams& params, const TaskDataset& task,
                      double lambda_reg, const GammaPrior& prior) {
  double tau = 0.0;
  for (const auto& r : task.records) tau += forward(params, r.features);
  tau = std::max(tau / static_cast<double>(task.records.size()), kTauFloor);
  double total = dataset_nll(task, tau) * static_cast<double>(task.records.size());
  return total - lambda_reg * gamma_log_density(tau, prior);
}

}  // namespace

double validation_loss(const ThermometerParams& params,
                       const std::vector<TaskDataset>& val_tasks, double lambda_reg,
                       const GammaPrior& prior) {
  if (val_tasks.empty()) throw std::invalid_argument("no validation tasks");
  double total = 0.0;
  for (const auto& task : val_tasks) {
    if (task.records.empty()) {
      throw std::invalid_argument("empty validation split for task " + task.name);
    }
    total += task_objective(params, task, lambda_reg, prior);
  }
  return total;
}

TrainResult train(const std::vector<TaskDataset>& tasks, const TrainConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("no training tasks");
  if (cfg.batch_size < 1 || cfg.checkpoint_every < 1) {
    throw std::invalid_argument("batch_size and checkpoint_every must be >= 1");
  }
  std::uint32_t burnin = cfg.resolved_burnin();
  if (cfg.iterations > 0 ? burnin >= cfg.iterations : burnin != 0) {
    throw std::invalid_argument("burnin must be below iterations");
  }

  const std::uint32_t input_dim = tasks[0].feature_dim;
  std::vector<TaskDataset> dev_tasks, val_tasks;
  std::size_t total_dev = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (tasks[k].feature_dim != input_dim) {
      throw std::invalid_argument("inconsistent feature dims across tasks");
    }
    auto [dev, val] = split_dev_val(
        tasks[k], SplitSpec{cfg.dev_fraction, mix_seed(cfg.seed, 0x5000 + k)});
    if (dev.records.empty()) {
      throw std::invalid_argument("empty dev split for task " + tasks[k].name);
    }
    total_dev += dev.records.size();
    dev_tasks.push_back(std::move(dev));
    val_tasks.push_back(std::move(val));
  }

  double num_batches = std::ceil(static_cast<double>(total_dev) /
                                 static_cast<double>(cfg.batch_size));

  TrainResult result;
  ThermometerParams params =
      init_params(input_dim, cfg.hidden_dim, mix_seed(cfg.seed, 0x1717));
  AdamWState opt = make_adamw_state(
      params, AdamWConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng rng(mix_seed(cfg.seed, 0x2a2a));

  auto take_checkpoint = [&](std::uint32_t iteration) {
    double vloss = validation_loss(params, val_tasks, cfg.lambda_reg, cfg.prior);
    result.history.push_back(Checkpoint{params, iteration, vloss});
  };

  std::vector<const CalibrationRecord*> batch(cfg.batch_size);
  std::vector<std::size_t> indices;
  for (std::uint32_t m = 1; m <= cfg.iterations; ++m) {
    const auto& dev = dev_tasks[rng.below(dev_tasks.size())];
    const std::size_t n = dev.records.size();
    if (n >= cfg.batch_size) {
      // partial Fisher-Yates draw without replacement
      indices.resize(n);
      for (std::size_t i = 0; i < n; ++i) indices[i] = i;
      for (std::uint32_t i = 0; i < cfg.batch_size; ++i) {
        std::size_t j = i + rng.below(n - i);
        std::swap(indices[i], indices[j]);
        batch[i] = &dev.records[indices[i]];
      }
    } else {
      for (std::uint32_t i = 0; i < cfg.batch_size; ++i) {
        batch[i] = &dev.records[rng.below(n)];
      }
    }

    BatchLoss bl =
        loss_and_grad(params, batch, cfg.lambda_reg, num_batches, cfg.prior);
    adamw_step(params, bl.grad, opt);
    result.iteration_losses.push_back(bl.loss);

    if (m > burnin && (m % cfg.checkpoint_every == 0 || m == cfg.iterations)) {
      take_checkpoint(m);
    }
  }
  if (result.history.empty()) take_checkpoint(cfg.iterations);

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.history.size(); ++i) {
    if (result.history[i].validation_loss < result.history[best].validation_loss) {
      best = i;
    }
  }
  result.best = result.history[best].params;
  return result;
}

LooResult run_leave_one_out(const std::vector<TaskDataset>& tasks,
                            const TrainConfig& cfg) {
  if (tasks.size() < 2) throw std::invalid_argument("leave-one-out needs >= 2 tasks");

  LooResult out;
  for (std::size_t held = 0; held < tasks.size(); ++held) {
    std::vector<TaskDataset> train_tasks;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      if (k != held) train_tasks.push_back(tasks[k]);
    }
    TrainResult tr = train(train_tasks, cfg);

    const TaskDataset& test = tasks[held];
    PosteriorSummary post = predict_task_temperature(tr.best, test, cfg.epsilon);
    TemperatureFit ts = fit_temperature_scaling(test);
    TemperatureFit ts_cv = fit_ts_cv(train_tasks);

    LabelVector labels;
    for (const auto& r : test.records) labels.push_back(r.label);
    auto report_at = [&](double tau, const std::string& method,
                         std::optional<double> temp_used) {
      ProbMatrix probs = apply_temperature_all(test, tau);
      return make_report(probs, labels, test.name, method, temp_used);
    };

    out.rows.push_back({test.name, "vanilla", report_at(1.0, "vanilla", std::nullopt)});
    out.rows.push_back(
        {test.name, "thermometer", report_at(post.mean, "thermometer", post.mean)});
    out.rows.push_back({test.name, "ts", report_at(ts.tau, "ts", ts.tau)});
    out.rows.push_back({test.name, "ts-cv", report_at(ts_cv.tau, "ts-cv", ts_cv.tau)});
    out.fold_params.push_back(std::move(tr.best));
    out.predicted_temperatures.push_back(post.mean);
  }
  return out;
}

}  // namespace thermo
