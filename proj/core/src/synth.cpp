#include "thermo/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "thermo/rng.hpp"

namespace thermo {
namespace {

void check_config(const SynthConfig& cfg) {
  if (cfg.num_tasks < 1 || cfg.records_per_task < 1 || cfg.feature_dim < 1) {
    throw std::invalid_argument("num_tasks, records_per_task, feature_dim must be positive");
  }
  if (cfg.num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (!(cfg.temp_lo > 0.0 && cfg.temp_hi >= cfg.temp_lo)) {
    throw std::invalid_argument("need 0 < temp_lo <= temp_hi");
  }
  if (!(cfg.logit_scale > 0.0)) throw std::invalid_argument("logit_scale must be positive");
}

}  // namespace

std::vector<TaskDataset> generate_suite(const SynthConfig& cfg) {
  check_config(cfg);
  const std::size_t d = cfg.feature_dim, v = cfg.num_classes;

  // shared readout, entries Normal(0,1)/sqrt(D) so logits stay O(scale)
  Rng shared(mix_seed(cfg.seed, 0));
  std::vector<double> readout_w(v * d);
  std::vector<double> readout_b(v);
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& w : readout_w) w = shared.normal() * inv_sqrt_d;
  for (auto& b : readout_b) b = shared.normal() * inv_sqrt_d;

  std::vector<TaskDataset> suite;
  suite.reserve(cfg.num_tasks);
  for (std::uint32_t k = 0; k < cfg.num_tasks; ++k) {
    Rng rng(mix_seed(cfg.seed, 1 + k));
    std::vector<double> mu(d);
    double mu_mean = 0.0;
    for (auto& m : mu) {
      m = rng.normal();
      mu_mean += m;
    }
    mu_mean /= static_cast<double>(d);
    double tau = cfg.temp_lo +
                 (cfg.temp_hi - cfg.temp_lo) / (1.0 + std::exp(-mu_mean));

    TaskDataset ds;
    char name[32];
    std::snprintf(name, sizeof(name), "synth-%03u", k);
    ds.name = name;
    ds.feature_dim = cfg.feature_dim;
    ds.num_classes = cfg.num_classes;
    ds.planted_temperature = static_cast<float>(tau);
    ds.records.resize(cfg.records_per_task);

    std::vector<double> logits(v), probs(v);
    for (auto& rec : ds.records) {
      rec.features.resize(d);
      for (std::size_t i = 0; i < d; ++i) {
        rec.features[i] = static_cast<float>(mu[i] + rng.normal());
      }
      double zmax = -INFINITY;
      for (std::size_t c = 0; c < v; ++c) {
        double z = readout_b[c];
        for (std::size_t i = 0; i < d; ++i) z += readout_w[c * d + i] * rec.features[i];
        logits[c] = cfg.logit_scale * z;
        zmax = std::max(zmax, logits[c]);
      }
      rec.logits.resize(v);
      double sum = 0.0;
      for (std::size_t c = 0; c < v; ++c) {
        rec.logits[c] = static_cast<float>(logits[c]);
        probs[c] = std::exp((logits[c] - zmax) / tau);
        sum += probs[c];
      }
      double u = rng.uniform() * sum;
      double acc = 0.0;
      rec.label = static_cast<std::uint32_t>(v - 1);
      for (std::size_t c = 0; c < v; ++c) {
        acc += probs[c];
        if (u < acc) {
          rec.label = static_cast<std::uint32_t>(c);
          break;
        }
      }
    }
    suite.push_back(std::move(ds));
  }
  return suite;
}

std::pair<double, double> grid_search_temperature(const TaskDataset& ds,
                                                  const std::vector<double>& grid) {
  if (ds.records.empty()) throw std::invalid_argument("empty dataset");
  if (grid.empty()) throw std::invalid_argument("empty grid");
  for (double tau : grid) {
    if (!(tau > 0.0)) throw std::invalid_argument("grid entries must be positive");
  }

  double best_tau = 0.0, best_nll = INFINITY;
  for (double tau : grid) {
    double total = 0.0;
    for (const auto& r : ds.records) {
      double zmax = -INFINITY;
      for (float z : r.logits) zmax = std::max(zmax, static_cast<double>(z));
      double lse = 0.0;
      for (float z : r.logits) lse += std::exp((z - zmax) / tau);
      total += -(r.logits[r.label] - zmax) / tau + std::log(lse);
    }
    double nll = total / static_cast<double>(ds.records.size());
    // strict comparison keeps the smallest tau on ties
    if (nll < best_nll || (nll == best_nll && tau < best_tau)) {
      best_nll = nll;
      best_tau = tau;
    }
  }
  return {best_tau, best_nll};
}

std::vector<double> default_temperature_grid() {
  std::vector<double> grid;
  for (int i = 5; i <= 2000; ++i) grid.push_back(i * 0.01);
  return grid;
}

}  // namespace thermo
