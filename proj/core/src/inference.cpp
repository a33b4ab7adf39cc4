#include "thermo/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "thermo/scaling.hpp"

namespace thermo {

PosteriorSummary predict_task_temperature(const ThermometerParams& params,
                                          const std::vector<std::vector<float>>& features,
                                          double epsilon) {
  if (features.empty()) throw std::invalid_argument("empty feature list");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  PosteriorSummary s;
  s.epsilon = epsilon;
  s.n_samples = features.size();
  s.psi_values.reserve(features.size());
  double total = 0.0;
  for (const auto& x : features) {
    double psi = forward(params, x);
    s.psi_values.push_back(psi);
    total += psi;
  }
  s.mean = total / static_cast<double>(s.n_samples);
  s.variance = epsilon / static_cast<double>(s.n_samples);
  return s;
}

PosteriorSummary predict_task_temperature(const ThermometerParams& params,
                                          const TaskDataset& ds, double epsilon) {
  std::vector<std::vector<float>> features;
  features.reserve(ds.records.size());
  for (const auto& r : ds.records) features.push_back(r.features);
  return predict_task_temperature(params, features, epsilon);
}

std::pair<double, double> posterior_product(const std::vector<double>& means,
                                            const std::vector<double>& variances) {
  if (means.size() != variances.size()) {
    throw std::invalid_argument("means/variances length mismatch");
  }
  if (means.empty()) throw std::invalid_argument("empty Gaussian list");
  double precision = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(variances[i] > 0.0)) {
      throw std::invalid_argument("non-positive variance at index " + std::to_string(i));
    }
    precision += 1.0 / variances[i];
    weighted += means[i] / variances[i];
  }
  double variance = 1.0 / precision;
  return {variance * weighted, variance};
}

BernsteinBound bernstein_bound(const BoundInputs& inputs) {
  if (inputs.n_samples < 2) throw std::invalid_argument("need at least 2 samples");
  if (!(inputs.psi_sup > 0.0 && inputs.psi_variance > 0.0 && inputs.lipschitz > 0.0)) {
    throw std::invalid_argument("bound inputs must be positive");
  }
  double n = static_cast<double>(inputs.n_samples);
  double log_n = std::log(n);
  BernsteinBound b;
  b.deviation_bound = (4.0 / 3.0) * inputs.psi_sup * log_n / n +
                      std::sqrt(2.0 * inputs.psi_variance) * std::sqrt(log_n / n);
  b.ce_bound = inputs.lipschitz * b.deviation_bound;
  b.failure_probability = 2.0 / (n * n);
  return b;
}

BoundInputs empirical_bound_inputs(const std::vector<double>& psi_values,
                                   double lipschitz) {
  if (psi_values.empty()) throw std::invalid_argument("empty psi list");
  BoundInputs b;
  b.lipschitz = lipschitz;
  b.n_samples = psi_values.size();
  double mean = 0.0;
  for (double p : psi_values) {
    b.psi_sup = std::max(b.psi_sup, p);
    mean += p;
  }
  mean /= static_cast<double>(psi_values.size());
  double var = 0.0;
  for (double p : psi_values) var += (p - mean) * (p - mean);
  var /= static_cast<double>(psi_values.size());
  // footnote fallback when the sample carries no spread
  b.psi_variance = var > 0.0 ? var : b.psi_sup * b.psi_sup / 4.0;
  return b;
}

std::pair<ProbMatrix, CalibrationReport> calibrate_dataset(const TaskDataset& ds,
                                                           double tau,
                                                           const std::string& method,
                                                           int num_bins) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  ProbMatrix probs = apply_temperature_all(ds, tau);
  LabelVector labels;
  labels.reserve(ds.records.size());
  for (const auto& r : ds.records) labels.push_back(r.label);
  CalibrationReport report =
      make_report(probs, labels, ds.name, method, tau, num_bins);
  return {std::move(probs), std::move(report)};
}

}  // namespace thermo
