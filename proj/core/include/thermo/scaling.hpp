#pragma once

#include <string>
#include <vector>

#include "thermo/dataset.hpp"
#include "thermo/metrics.hpp"
#include "thermo/net.hpp"

namespace thermo {

struct TemperatureFit {
  double tau = 1.0;
  double final_nll = 0.0;
  std::string method;  // "TS" or "TS-CV"
  double range_lo = 0.05;
  double range_hi = 20.0;
  bool boundary_hit = false;
};

// softmax(logits / tau), max-subtracted.
ProbVector apply_temperature(const std::vector<float>& logits, double tau);
ProbMatrix apply_temperature_all(const TaskDataset& ds, double tau);

// Mean NLL of softmax(z / tau) against the labels.
double dataset_nll(const TaskDataset& ds, double tau);
double pooled_nll(const std::vector<const TaskDataset*>& tasks, double tau);

// Golden-section search over log tau; clamped endpoints are valid optima
// and flagged via boundary_hit.
TemperatureFit fit_temperature_scaling(const TaskDataset& ds, double range_lo = 0.05,
                                       double range_hi = 20.0);

// Single temperature minimizing pooled NLL over every record of every task.
TemperatureFit fit_ts_cv(const std::vector<TaskDataset>& tasks, double range_lo = 0.05,
                         double range_hi = 20.0);

// Each record scaled by its own psi(features) instead of a task aggregate.
ProbMatrix sample_wise_calibrate(const TaskDataset& ds, const ThermometerParams& params);

}  // namespace thermo
