#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "thermo/dataset.hpp"
#include "thermo/metrics.hpp"
#include "thermo/net.hpp"

namespace thermo {

// Gaussian posterior over the task temperature: mean of the per-sample psi
// values, variance epsilon / N.
struct PosteriorSummary {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t n_samples = 0;
  double epsilon = 0.0;
  std::vector<double> psi_values;
};

PosteriorSummary predict_task_temperature(const ThermometerParams& params,
                                          const std::vector<std::vector<float>>& features,
                                          double epsilon = 0.01);
PosteriorSummary predict_task_temperature(const ThermometerParams& params,
                                          const TaskDataset& ds, double epsilon = 0.01);

// Precision-weighted product of one-dimensional Gaussians.
std::pair<double, double> posterior_product(const std::vector<double>& means,
                                            const std::vector<double>& variances);

struct BoundInputs {
  double psi_sup = 0.0;     // C: sup of psi over the support
  double psi_variance = 0.0;  // V: variance bound (C^2/4 if unknown)
  double lipschitz = 1.0;   // L of the calibration-error-vs-temperature map
  std::size_t n_samples = 0;
};

struct BernsteinBound {
  double deviation_bound = 0.0;
  double ce_bound = 0.0;
  double failure_probability = 0.0;  // 2 / N^2
};

// (4/3) C log(N)/N + sqrt(2 V) sqrt(log(N)/N), natural log; holds with
// probability 1 - 2/N^2. ce_bound is L times the deviation bound.
BernsteinBound bernstein_bound(const BoundInputs& inputs);

// Empirical C and V from observed psi values, for use in BoundInputs.
BoundInputs empirical_bound_inputs(const std::vector<double>& psi_values,
                                   double lipschitz = 1.0);

// Scale every record by one temperature and score the result.
std::pair<ProbMatrix, CalibrationReport> calibrate_dataset(
    const TaskDataset& ds, double tau, const std::string& method = "calibrated",
    int num_bins = 10);

}  // namespace thermo
