#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "thermo/dataset.hpp"

namespace thermo {

// Multi-task synthetic suites with a planted per-task optimal temperature.
// Per task: a mean vector mu_k is drawn once, features are Normal(mu_k, I),
// logits are scale * (W x + b) with W, b shared across the suite, the planted
// temperature is a smooth monotone map of mean(mu_k) into [temp_lo, temp_hi],
// and labels are drawn from softmax(z / tau_k*). The NLL-optimal
// recalibration temperature of a task converges to tau_k* with N, and tau_k*
// is predictable from features alone.
struct SynthConfig {
  std::uint32_t num_tasks = 10;
  std::uint32_t records_per_task = 5000;
  std::uint32_t feature_dim = 16;
  std::uint32_t num_classes = 4;
  double temp_lo = 0.5;
  double temp_hi = 3.0;
  double logit_scale = 5.0;
  std::uint64_t seed = 0;
};

std::vector<TaskDataset> generate_suite(const SynthConfig& cfg);

// Brute-force NLL minimization over an explicit grid; ties go to the
// smallest temperature. Returns (tau_hat, mean NLL at tau_hat).
std::pair<double, double> grid_search_temperature(const TaskDataset& ds,
                                                  const std::vector<double>& grid);

// 0.05 .. 20.0 in steps of 0.01, matching the TS search range.
std::vector<double> default_temperature_grid();

}  // namespace thermo
