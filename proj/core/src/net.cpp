#include "thermo/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "thermo/rng.hpp"

namespace thermo {
namespace {

constexpr char kCheckpointMagic[4] = {'T', 'H', 'C', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Per-sample activations cached for the backward pass.
struct ForwardCache {
  std::vector<double> pre_hidden;   // 3*H, W1 x + b1 per branch
  std::array<double, 3> branch_out; // W2 relu(.) + b2
  double head_pre = 0.0;            // w . branch_out + b
  double psi = 0.0;                 // softplus(head_pre), before clamp
  bool clamped = false;
};

double forward_cached(const ThermometerParams& p, const std::vector<float>& x,
                      ForwardCache* cache) {
  const std::size_t d = p.input_dim, h = p.hidden_dim;
  if (x.size() != d) throw std::invalid_argument("feature dimension mismatch");
  const std::size_t branch_size = p.branch_size();

  if (cache) cache->pre_hidden.resize(3 * h);
  const double* head_w = p.values.data() + 3 * branch_size;
  double head_pre = head_w[3];  // head bias
  std::array<double, 3> branch_out{};
  for (int b = 0; b < 3; ++b) {
    const double* w1 = p.values.data() + b * branch_size;
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    double b2 = w2[h];
    double u = b2;
    for (std::size_t j = 0; j < h; ++j) {
      double a = b1[j];
      const double* row = w1 + j * d;
      for (std::size_t i = 0; i < d; ++i) a += row[i] * x[i];
      if (cache) cache->pre_hidden[b * h + j] = a;
      if (a > 0.0) u += w2[j] * a;
    }
    branch_out[b] = u;
    head_pre += head_w[b] * u;
  }

  double psi = softplus(head_pre);
  bool clamped = psi < kTauFloor;
  if (cache) {
    cache->branch_out = branch_out;
    cache->head_pre = head_pre;
    cache->psi = psi;
    cache->clamped = clamped;
  }
  return clamped ? kTauFloor : psi;
}

}  // namespace

ThermometerParams init_params(std::uint32_t input_dim, std::uint32_t hidden_dim,
                              std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("input_dim and hidden_dim must be >= 1");
  }
  ThermometerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.values.resize(ThermometerParams::param_count(input_dim, hidden_dim));

  Rng rng(seed);
  const std::size_t d = input_dim, h = hidden_dim;
  const std::size_t branch_size = p.branch_size();
  double w1_bound = 1.0 / std::sqrt(static_cast<double>(d));
  double w2_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (int b = 0; b < 3; ++b) {
    double* w1 = p.values.data() + b * branch_size;
    for (std::size_t i = 0; i < h * d; ++i) w1[i] = rng.uniform(-w1_bound, w1_bound);
    double* b1 = w1 + h * d;
    std::fill(b1, b1 + h, 0.0);
    double* w2 = b1 + h;
    for (std::size_t j = 0; j < h; ++j) w2[j] = rng.uniform(-w2_bound, w2_bound);
    w2[h] = 0.0;  // b2
  }
  double* head = p.values.data() + 3 * branch_size;
  double head_bound = 1.0 / std::sqrt(3.0);
  for (int b = 0; b < 3; ++b) head[b] = rng.uniform(-head_bound, head_bound);
  // softplus(head bias) = 1 for the zero-feature network, so training starts
  // near temperature one
  head[3] = std::log(std::exp(1.0) - 1.0);
  return p;
}

double forward(const ThermometerParams& params, const std::vector<float>& features) {
  return forward_cached(params, features, nullptr);
}

double gamma_log_density(double tau, const GammaPrior& prior) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  return (prior.shape - 1.0) * std::log(tau) - tau / prior.scale -
         prior.shape * std::log(prior.scale) - std::lgamma(prior.shape);
}

double gamma_log_density_dtau(double tau, const GammaPrior& prior) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  return (prior.shape - 1.0) / tau - 1.0 / prior.scale;
}

BatchLoss loss_and_grad(const ThermometerParams& params,
                        const std::vector<const CalibrationRecord*>& batch,
                        double lambda_reg, double num_batches,
                        const GammaPrior& prior) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t nb = batch.size();
  const std::size_t d = params.input_dim, h = params.hidden_dim;
  const std::size_t branch_size = params.branch_size();

  std::vector<ForwardCache> caches(nb);
  double tau_hat = 0.0;
  for (std::size_t n = 0; n < nb; ++n) {
    tau_hat += forward_cached(params, batch[n]->features, &caches[n]);
  }
  tau_hat /= static_cast<double>(nb);
  tau_hat = std::max(tau_hat, kTauFloor);

  // NLL at the shared temperature, plus d(loss)/d(tau_hat) accumulated as
  // (z_y - sum_v p_v z_v) / tau^2 per record
  double loss = 0.0;
  double dloss_dtau = 0.0;
  std::vector<double> probs;
  for (std::size_t n = 0; n < nb; ++n) {
    const auto& z = batch[n]->logits;
    if (z.empty() || batch[n]->label >= z.size()) {
      throw std::invalid_argument("record " + std::to_string(n) +
                                  ": bad logits/label");
    }
    double zmax = -INFINITY;
    for (float v : z) zmax = std::max(zmax, static_cast<double>(v));
    double lse = 0.0;
    probs.assign(z.size(), 0.0);
    for (std::size_t v = 0; v < z.size(); ++v) {
      probs[v] = std::exp((z[v] - zmax) / tau_hat);
      lse += probs[v];
    }
    double mean_z = 0.0;
    for (std::size_t v = 0; v < z.size(); ++v) {
      probs[v] /= lse;
      mean_z += probs[v] * z[v];
    }
    double zy = z[batch[n]->label];
    double record_nll = -(zy - zmax) / tau_hat + std::log(lse);
    if (!std::isfinite(record_nll)) {
      throw std::invalid_argument("non-finite loss at record " + std::to_string(n));
    }
    loss += record_nll;
    dloss_dtau += (zy - mean_z) / (tau_hat * tau_hat);
  }

  double prior_scale = lambda_reg / num_batches;
  loss -= prior_scale * gamma_log_density(tau_hat, prior);
  dloss_dtau -= prior_scale * gamma_log_density_dtau(tau_hat, prior);

  BatchLoss out;
  out.loss = loss;
  out.tau_hat = tau_hat;
  out.grad.assign(params.values.size(), 0.0);

  const double* head_w = params.values.data() + 3 * branch_size;
  double* head_g = out.grad.data() + 3 * branch_size;
  for (std::size_t n = 0; n < nb; ++n) {
    const ForwardCache& c = caches[n];
    if (c.clamped) continue;  // flat under the clamp
    double dpsi = dloss_dtau / static_cast<double>(nb) * sigmoid(c.head_pre);
    for (int b = 0; b < 3; ++b) head_g[b] += dpsi * c.branch_out[b];
    head_g[3] += dpsi;

    const auto& x = batch[n]->features;
    for (int b = 0; b < 3; ++b) {
      double du = dpsi * head_w[b];
      const double* w2 = params.values.data() + b * branch_size + h * d + h;
      double* g_w1 = out.grad.data() + b * branch_size;
      double* g_b1 = g_w1 + h * d;
      double* g_w2 = g_b1 + h;
      g_w2[h] += du;  // b2
      for (std::size_t j = 0; j < h; ++j) {
        double a = c.pre_hidden[b * h + j];
        if (a > 0.0) {
          g_w2[j] += du * a;
          double dh = du * w2[j];
          g_b1[j] += dh;
          double* row = g_w1 + j * d;
          for (std::size_t i = 0; i < d; ++i) row[i] += dh * x[i];
        }
      }
    }
  }
  return out;
}

AdamWState make_adamw_state(const ThermometerParams& params, const AdamWConfig& config) {
  AdamWState s;
  s.config = config;
  s.first_moment.assign(params.values.size(), 0.0);
  s.second_moment.assign(params.values.size(), 0.0);
  return s;
}

void adamw_step(ThermometerParams& params, const std::vector<double>& grad,
                AdamWState& state) {
  if (grad.size() != params.values.size() ||
      state.first_moment.size() != params.values.size()) {
    throw std::invalid_argument("gradient/state shape mismatch");
  }
  const AdamWConfig& c = state.config;
  state.step += 1;
  double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
    double m_hat = m / bc1;
    double v_hat = v / bc2;
    params.values[i] -= c.learning_rate *
                        (m_hat / (std::sqrt(v_hat) + c.epsilon) +
                         c.weight_decay * params.values[i]);
  }
}

void save_params(const ThermometerParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, 4);
  auto write_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  write_u32(kCheckpointVersion);
  write_u32(params.input_dim);
  write_u32(params.hidden_dim);
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

ThermometerParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw IoError("bad magic in " + path);
  }
  auto read_u32 = [&](const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("truncated checkpoint reading " + std::string(what));
    return v;
  };
  std::uint32_t version = read_u32("version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  ThermometerParams p;
  p.input_dim = read_u32("input_dim");
  p.hidden_dim = read_u32("hidden_dim");
  p.values.resize(ThermometerParams::param_count(p.input_dim, p.hidden_dim));
  in.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint payload in " + path);
  return p;
}

}  // namespace thermo
