#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermo/dataset.hpp"

namespace thermo {

// Shape/scale parameterization; the default matches a mode at one.
struct GammaPrior {
  double shape = 1.25;
  double scale = 4.0;
};

// Predicted temperatures never go below this; gradient is zero under the
// clamp.
constexpr double kTauFloor = 1e-3;

// Recognition network: three independent branches (linear H x D, ReLU,
// linear 1 x H), a final affine layer over the concatenated branch outputs,
// and a softplus head. Parameters are kept flat so the optimizer and the
// checkpoint format stay trivial.
//
// Flat layout, per branch b in 0..2:
//   W1 (H*D, row-major), b1 (H), W2 (H), b2 (1)
// then head weights (3) and head bias (1).
struct ThermometerParams {
  std::uint32_t input_dim = 0;
  std::uint32_t hidden_dim = 0;
  std::vector<double> values;

  static std::size_t param_count(std::uint32_t input_dim, std::uint32_t hidden_dim) {
    std::size_t per_branch =
        static_cast<std::size_t>(hidden_dim) * input_dim + hidden_dim + hidden_dim + 1;
    return 3 * per_branch + 3 + 1;
  }
  std::size_t branch_size() const {
    return static_cast<std::size_t>(hidden_dim) * input_dim + 2 * hidden_dim + 1;
  }

  bool operator==(const ThermometerParams&) const = default;
};

ThermometerParams init_params(std::uint32_t input_dim, std::uint32_t hidden_dim,
                              std::uint64_t seed);

// psi(x): strictly positive per-sample temperature.
double forward(const ThermometerParams& params, const std::vector<float>& features);

double gamma_log_density(double tau, const GammaPrior& prior);
double gamma_log_density_dtau(double tau, const GammaPrior& prior);

struct BatchLoss {
  double loss = 0.0;
  double tau_hat = 0.0;              // batch-mean temperature
  std::vector<double> grad;          // same layout as ThermometerParams::values
};

// Loss over one task minibatch: sum of per-record NLL at the batch-mean
// temperature minus (lambda_reg / num_batches) * log Gamma(tau_hat).
// Gradients are analytic; num_batches is the B of the training schedule.
BatchLoss loss_and_grad(const ThermometerParams& params,
                        const std::vector<const CalibrationRecord*>& batch,
                        double lambda_reg, double num_batches,
                        const GammaPrior& prior);

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamWState {
  AdamWConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

AdamWState make_adamw_state(const ThermometerParams& params, const AdamWConfig& config);
void adamw_step(ThermometerParams& params, const std::vector<double>& grad,
                AdamWState& state);

// Checkpoint file: magic "THCP", version u32, input_dim u32, hidden_dim u32,
// then the flat values as little-endian f64. Round-trips exactly.
void save_params(const ThermometerParams& params, const std::string& path);
ThermometerParams load_params(const std::string& path);

}  // namespace thermo
