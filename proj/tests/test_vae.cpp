#include <doctest.h>

#include <cmath>

#include "gmlab/grad_check.hpp"
#include "gmlab/vae.hpp"

using namespace gmlab;

namespace {

VaeConfig tiny_cfg(double lambda) {
  VaeConfig cfg;
  cfg.feat_dim = 3;
  cfg.latent_dim = 2;
  cfg.stride = 2;
  cfg.hidden = 4;
  cfg.lambda = lambda;
  cfg.prior.mixtures = 2;
  return cfg;
}

}  // namespace

TEST_CASE("windowed linear map picks the centered row for a unit kernel") {
  // kernel that returns the center element of each width-3 window
  Tensor w = Tensor::constant({3, 1}, {0.0, 1.0, 0.0});
  Tensor b = Tensor::zeros({1});
  Tensor x = Tensor::constant({4, 1}, {1.0, 2.0, 3.0, 4.0});
  CHECK(conv1d(x, w, b, 1).values() == std::vector<double>{1, 2, 3, 4});
  CHECK(conv1d(x, w, b, 2).values() == std::vector<double>{1, 3});

  // edge replication: the left kernel tap at t = 0 sees x[0]
  Tensor wl = Tensor::constant({3, 1}, {1.0, 0.0, 0.0});
  CHECK(conv1d(x, wl, b, 1).values() == std::vector<double>{1, 1, 2, 3});
}

TEST_CASE("encoder is deterministic with the contracted output length") {
  Rng rng(3);
  GmmVae model(tiny_cfg(1.0), rng);
  Tensor x = sample_standard_normal(rng, {5, 3});
  Tensor h1 = model.encode(x);
  Tensor h2 = model.encode(x);
  CHECK(h1.values() == h2.values());
  CHECK(h1.shape() == Shape{3, 2});  // ceil(5/2)
  CHECK(model.decode(h1, 5).shape() == Shape{5, 3});
  CHECK_THROWS_AS(model.encode(Tensor::zeros({2, 7})), ContractError);
}

TEST_CASE("zeroed output layer decodes to exactly zero") {
  Rng rng(5);
  GmmVae model(tiny_cfg(0.0), rng);
  for (auto& [name, p] : model.parameters()) {
    if (name == "dec.w3" || name == "dec.b3") {
      std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
    }
  }
  Tensor x = sample_standard_normal(rng, {4, 3});
  Tensor dec = model.decode(model.encode(x), 4);
  for (double v : dec.values()) CHECK(v == 0.0);
}

TEST_CASE("lambda zero makes the total exactly the reconstruction error") {
  Rng rng(7);
  GmmVae model(tiny_cfg(0.0), rng);
  Tensor x = sample_standard_normal(rng, {6, 3});
  auto l = model.loss(x);
  CHECK(l.total.item() == l.recon.item());
  CHECK(l.reg.item() == 0.0);
}

TEST_CASE("total equals recon plus the independently recomputed regularizer") {
  Rng rng(9);
  GmmVae model(tiny_cfg(7.5), rng);
  Tensor x = sample_standard_normal(rng, {6, 3});
  auto l = model.loss(x);

  Tensor h = model.encode(x);
  Tensor ld = gmm_log_density_rows(h, model.prior());
  double mean_ld = 0.0;
  for (double v : ld.values()) mean_ld += v;
  mean_ld /= static_cast<double>(ld.size());
  CHECK(l.total.item() ==
        doctest::Approx(l.recon.item() - 7.5 * mean_ld).epsilon(1e-12));
  CHECK(l.reg.item() == doctest::Approx(-7.5 * mean_ld).epsilon(1e-12));
}

TEST_CASE("loss gradients pass grad_check end to end") {
  Rng rng(11);
  GmmVae model(tiny_cfg(2.0), rng);
  Tensor x = sample_standard_normal(rng, {4, 3});
  std::vector<Tensor> leaves;
  for (auto& [name, p] : model.parameters()) leaves.push_back(p);
  const double err = grad_check_params(
      [&]() { return model.loss(x).total; }, leaves);
  CHECK(err < 1e-5);
}

TEST_CASE("regularizer pulls latents toward the prior") {
  // identical models and data; only lambda differs
  auto train = [](double lambda) {
    Rng rng(13);
    VaeConfig cfg = tiny_cfg(lambda);
    cfg.prior.mixtures = 1;
    GmmVae model(cfg, rng);
    // center the prior at the origin so the pull is toward zero
    for (auto& [name, p] : model.parameters()) {
      if (name == "prior.means") {
        std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
      }
    }
    Rng data_rng(99);
    Tensor x = mul_scalar(sample_standard_normal(data_rng, {8, 3}), 2.0);
    Adam opt(AdamConfig{0.01, 0.9, 0.999, 1e-8, 1.0});
    for (int step = 0; step < 150; ++step) {
      backward(model.loss(x).total);
      auto params = model.parameters();
      opt.step(params);
    }
    Tensor h = model.encode(x);
    double norm = 0.0;
    for (double v : h.values()) norm += v * v;
    return std::sqrt(norm / h.size());
  };
  CHECK(train(10.0) < train(0.0));
}
