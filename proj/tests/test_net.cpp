#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "naive_metrics.hpp"
#include "test_util.hpp"
#include "thermo/net.hpp"

using namespace thermo;

namespace {

double softplus_ref(double x) { return std::log1p(std::exp(x)); }

std::vector<const CalibrationRecord*> as_batch(const std::vector<CalibrationRecord>& recs) {
  std::vector<const CalibrationRecord*> b;
  for (const auto& r : recs) b.push_back(&r);
  return b;
}

}  // namespace

TEST_CASE("init_params is deterministic in the seed and counts parameters") {
  ThermometerParams a = init_params(4, 8, 42);
  ThermometerParams b = init_params(4, 8, 42);
  CHECK(a == b);
  ThermometerParams c = init_params(4, 8, 43);
  CHECK(a.values != c.values);

  CHECK(ThermometerParams::param_count(1, 1) == 16);  // 3*(1+1+1+1) + 3 + 1
  CHECK(a.values.size() == ThermometerParams::param_count(4, 8));
}

TEST_CASE("freshly initialized network outputs about one on zero input") {
  ThermometerParams p = init_params(6, 4, 7);
  double out = forward(p, std::vector<float>(6, 0.0f));
  CHECK(out == doctest::Approx(1.0).epsilon(1e-9));  // softplus of the head bias
  CHECK(out > 0.0);
}

TEST_CASE("all-zero network computes softplus(0) for any input") {
  ThermometerParams p = init_params(3, 2, 0);
  for (auto& v : p.values) v = 0.0;
  CHECK(forward(p, {1.0f, -2.0f, 0.5f}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("hand-set 1x1 network matches a pencil computation") {
  ThermometerParams p;
  p.input_dim = 1;
  p.hidden_dim = 1;
  p.values.resize(ThermometerParams::param_count(1, 1));
  // branch b: W1=0.5+b, b1=-0.1, W2=2, b2=0.3; head w=(1, -0.5, 0.25), b=0.2
  for (int b = 0; b < 3; ++b) {
    double* br = p.values.data() + b * p.branch_size();
    br[0] = 0.5 + b;
    br[1] = -0.1;
    br[2] = 2.0;
    br[3] = 0.3;
  }
  double* head = p.values.data() + 3 * p.branch_size();
  head[0] = 1.0;
  head[1] = -0.5;
  head[2] = 0.25;
  head[3] = 0.2;

  double x = 0.75;  // exactly representable as float
  double expected_head = 0.2;
  double head_w[3] = {1.0, -0.5, 0.25};
  for (int b = 0; b < 3; ++b) {
    double a = (0.5 + b) * x - 0.1;
    double u = 2.0 * std::max(a, 0.0) + 0.3;
    expected_head += head_w[b] * u;
  }
  CHECK(forward(p, {static_cast<float>(x)}) ==
        doctest::Approx(softplus_ref(expected_head)).epsilon(1e-12));
}

TEST_CASE("forward output is clamped at 1e-3") {
  ThermometerParams p = testutil::constant_network(2, 2, 1.0);
  p.values.back() = -100.0;  // drives softplus to ~0
  CHECK(forward(p, {0.0f, 0.0f}) == kTauFloor);
}

TEST_CASE("gamma prior has a stationary point at one") {
  GammaPrior prior;  // 1.25 / 4
  CHECK(gamma_log_density_dtau(1.0, prior) == 0.0);
  CHECK(gamma_log_density_dtau(0.5, prior) > 0.0);
  CHECK(gamma_log_density_dtau(2.0, prior) < 0.0);
  CHECK_THROWS_AS(gamma_log_density(0.0, prior), std::invalid_argument);
  CHECK_THROWS_AS(gamma_log_density_dtau(-1.0, prior), std::invalid_argument);
}

TEST_CASE("gamma log density matches an independent lnGamma oracle") {
  GammaPrior prior;
  for (double tau : {0.5, 1.0, 2.0, 5.0}) {
    double expected = (prior.shape - 1.0) * std::log(tau) - tau / prior.scale -
                      prior.shape * std::log(prior.scale) -
                      naive::log_gamma(prior.shape);
    CHECK(gamma_log_density(tau, prior) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("constant-per-record logits leave only the prior gradient") {
  Rng rng(21);
  std::vector<CalibrationRecord> recs(8);
  for (auto& r : recs) {
    r.features = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
    float c = static_cast<float>(rng.normal());
    r.logits = {c, c, c};
    r.label = static_cast<std::uint32_t>(rng.below(3));
  }
  ThermometerParams p = init_params(2, 3, 9);
  auto batch = as_batch(recs);

  BatchLoss with_prior = loss_and_grad(p, batch, 1.0, 1.0, GammaPrior{});
  BatchLoss without_prior = loss_and_grad(p, batch, 0.0, 1.0, GammaPrior{});
  double norm = 0.0;
  for (double g : without_prior.grad) norm += g * g;
  CHECK(norm == doctest::Approx(0.0).epsilon(1e-20));  // NLL gradient vanishes
  double prior_norm = 0.0;
  for (double g : with_prior.grad) prior_norm += g * g;
  CHECK(prior_norm > 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    std::uint32_t d = 4, h = 8;
    ThermometerParams p = init_params(d, h, 100 + trial);
    // roughen the parameters so the test is not at the symmetric init
    for (auto& v : p.values) v += 0.3 * rng.normal();

    std::vector<CalibrationRecord> recs(6);
    for (auto& r : recs) {
      r.features.resize(d);
      r.logits.resize(4);
      for (auto& x : r.features) x = static_cast<float>(rng.normal());
      for (auto& z : r.logits) z = static_cast<float>(2.0 * rng.normal());
      r.label = static_cast<std::uint32_t>(rng.below(4));
    }
    auto batch = as_batch(recs);
    GammaPrior prior;
    BatchLoss bl = loss_and_grad(p, batch, 0.01, 2.0, prior);

    double max_rel = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      double h_i = 1e-5 * (1.0 + std::abs(p.values[i]));
      ThermometerParams plus = p, minus = p;
      plus.values[i] += h_i;
      minus.values[i] -= h_i;
      double fd = (loss_and_grad(plus, batch, 0.01, 2.0, prior).loss -
                   loss_and_grad(minus, batch, 0.01, 2.0, prior).loss) /
                  (2.0 * h_i);
      double rel = std::abs(bl.grad[i] - fd) /
                   std::max({1e-3, std::abs(bl.grad[i]), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("batch of one reduces to the sample-wise objective") {
  Rng rng(23);
  CalibrationRecord r;
  r.features = {0.5f, -1.0f};
  r.logits = {1.0f, 2.0f, -0.5f};
  r.label = 1;
  ThermometerParams p = init_params(2, 3, 3);
  BatchLoss bl = loss_and_grad(p, {&r}, 0.0, 1.0, GammaPrior{});
  double tau = forward(p, r.features);
  CHECK(bl.tau_hat == doctest::Approx(tau).epsilon(1e-12));
}

TEST_CASE("sharpening a self-consistent batch lowers the loss") {
  Rng rng(24);
  std::vector<CalibrationRecord> recs(16);
  for (auto& r : recs) {
    r.features = {static_cast<float>(rng.normal())};
    r.logits = {static_cast<float>(rng.normal() * 3.0),
                static_cast<float>(rng.normal() * 3.0)};
    r.label = r.logits[0] > r.logits[1] ? 0 : 1;
  }
  auto batch = as_batch(recs);
  BatchLoss at_one =
      loss_and_grad(testutil::constant_network(1, 1, 1.0), batch, 0.0, 1.0, GammaPrior{});
  BatchLoss at_half =
      loss_and_grad(testutil::constant_network(1, 1, 0.5), batch, 0.0, 1.0, GammaPrior{});
  CHECK(at_half.loss < at_one.loss);
}

TEST_CASE("adamw hand-checked steps") {
  ThermometerParams p;
  p.input_dim = p.hidden_dim = 1;
  p.values = std::vector<double>(ThermometerParams::param_count(1, 1), 0.5);

  SUBCASE("zero gradient and zero decay is a no-op") {
    AdamWState s = make_adamw_state(p, AdamWConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
    ThermometerParams before = p;
    adamw_step(p, std::vector<double>(p.values.size(), 0.0), s);
    CHECK(p == before);
  }

  SUBCASE("unit gradient at t=1 moves by about the learning rate") {
    AdamWState s = make_adamw_state(p, AdamWConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
    adamw_step(p, std::vector<double>(p.values.size(), 1.0), s);
    CHECK(p.values[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  }

  SUBCASE("decay alone multiplies by (1 - lr * decay)") {
    AdamWState s = make_adamw_state(p, AdamWConfig{1e-3, 0.9, 0.999, 1e-8, 0.1});
    adamw_step(p, std::vector<double>(p.values.size(), 0.0), s);
    CHECK(p.values[0] == doctest::Approx(0.5 * (1.0 - 1e-3 * 0.1)).epsilon(1e-12));
  }

  SUBCASE("bitwise deterministic") {
    ThermometerParams q = p;
    AdamWState s1 = make_adamw_state(p, AdamWConfig{});
    AdamWState s2 = make_adamw_state(q, AdamWConfig{});
    std::vector<double> g(p.values.size(), 0.25);
    for (int i = 0; i < 5; ++i) {
      adamw_step(p, g, s1);
      adamw_step(q, g, s2);
    }
    CHECK(p.values == q.values);
  }
}

TEST_CASE("checkpoint files round-trip exactly") {
  ThermometerParams p = init_params(5, 4, 77);
  std::string path =
      (std::filesystem::temp_directory_path() / "thermo_ckpt_test.bin").string();
  save_params(p, path);
  ThermometerParams loaded = load_params(path);
  CHECK(loaded == p);

  // byte-identical on re-save
  save_params(loaded, path + "2");
  std::ifstream a(path, std::ios::binary), b(path + "2", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}
