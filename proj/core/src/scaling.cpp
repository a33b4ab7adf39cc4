#include "thermo/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thermo {
namespace {

double record_nll(const CalibrationRecord& r, double tau) {
  double zmax = -INFINITY;
  for (float z : r.logits) zmax = std::max(zmax, static_cast<double>(z));
  double lse = 0.0;
  for (float z : r.logits) lse += std::exp((z - zmax) / tau);
  return -(r.logits[r.label] - zmax) / tau + std::log(lse);
}

// minimize over t = log(tau) by golden section; f must be callable on tau
template <typename F>
double golden_section_log_tau(F&& nll_at, double lo, double hi, int iterations) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::log(lo), b = std::log(hi);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = nll_at(std::exp(c));
  double fd = nll_at(std::exp(d));
  for (int i = 0; i < iterations; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = nll_at(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = nll_at(std::exp(d));
    }
  }
  return std::exp(0.5 * (a + b));
}

template <typename F>
TemperatureFit fit_impl(F&& nll_at, double lo, double hi, const std::string& method) {
  if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("bad search range");
  double tau = golden_section_log_tau(nll_at, lo, hi, 200);

  // pick the best of the search result, the endpoints and the identity; the
  // fit must never be worse than tau = 1
  TemperatureFit fit;
  fit.method = method;
  fit.range_lo = lo;
  fit.range_hi = hi;
  fit.tau = tau;
  fit.final_nll = nll_at(tau);
  for (double cand : {lo, hi, 1.0}) {
    if (cand < lo || cand > hi) continue;
    double v = nll_at(cand);
    if (v < fit.final_nll) {
      fit.tau = cand;
      fit.final_nll = v;
    }
  }
  double rel = 1e-6 * (hi - lo);
  fit.boundary_hit = fit.tau <= lo + rel || fit.tau >= hi - rel;
  return fit;
}

}  // namespace

ProbVector apply_temperature(const std::vector<float>& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (logits.empty()) throw std::invalid_argument("empty logit vector");
  double zmax = -INFINITY;
  for (float z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
    zmax = std::max(zmax, static_cast<double>(z));
  }
  ProbVector p(logits.size());
  double sum = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    p[v] = std::exp((logits[v] - zmax) / tau);
    sum += p[v];
  }
  for (double& x : p) x /= sum;
  return p;
}

ProbMatrix apply_temperature_all(const TaskDataset& ds, double tau) {
  ProbMatrix probs;
  probs.reserve(ds.records.size());
  for (const auto& r : ds.records) probs.push_back(apply_temperature(r.logits, tau));
  return probs;
}

double dataset_nll(const TaskDataset& ds, double tau) {
  if (ds.records.empty()) throw std::invalid_argument("empty dataset");
  double total = 0.0;
  for (const auto& r : ds.records) total += record_nll(r, tau);
  return total / static_cast<double>(ds.records.size());
}

double pooled_nll(const std::vector<const TaskDataset*>& tasks, double tau) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto* ds : tasks) {
    for (const auto& r : ds->records) total += record_nll(r, tau);
    n += ds->records.size();
  }
  if (n == 0) throw std::invalid_argument("empty task pool");
  return total / static_cast<double>(n);
}

TemperatureFit fit_temperature_scaling(const TaskDataset& ds, double range_lo,
                                       double range_hi) {
  if (ds.records.empty()) throw std::invalid_argument("empty dataset");
  return fit_impl([&](double tau) { return dataset_nll(ds, tau); }, range_lo,
                  range_hi, "TS");
}

TemperatureFit fit_ts_cv(const std::vector<TaskDataset>& tasks, double range_lo,
                         double range_hi) {
  std::vector<const TaskDataset*> ptrs;
  for (const auto& t : tasks) ptrs.push_back(&t);
  TemperatureFit fit = fit_impl(
      [&](double tau) { return pooled_nll(ptrs, tau); }, range_lo, range_hi, "TS-CV");
  return fit;
}

ProbMatrix sample_wise_calibrate(const TaskDataset& ds, const ThermometerParams& params) {
  if (ds.feature_dim != params.input_dim) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  ProbMatrix probs;
  probs.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    probs.push_back(apply_temperature(r.logits, forward(params, r.features)));
  }
  return probs;
}

}  // namespace thermo
