#include "gmlab/vae.hpp"

#include <cmath>

namespace gmlab {

namespace {

Tensor init_weight(std::size_t in, std::size_t out, Rng& rng) {
  std::vector<double> w(in * out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& x : w) x = s * rng.standard_normal();
  return Tensor::param({in, out}, std::move(w));
}

Tensor init_bias(std::size_t out) {
  return Tensor::param({out}, std::vector<double>(out, 0.0));
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride) {
  if (x.rank() != 2) throw ContractError("conv1d: x must be 2-D");
  const std::size_t T = x.shape()[0], C = x.shape()[1];
  if (T == 0) throw ContractError("conv1d: empty input");
  if (stride == 0) throw ContractError("conv1d: zero stride");
  if (w.shape()[0] != 3 * C) throw ContractError("conv1d: weight rows != 3C");
  const std::size_t Tout = (T + stride - 1) / stride;

  std::vector<std::size_t> idx;
  idx.reserve(3 * Tout);
  for (std::size_t t = 0; t < Tout; ++t) {
    const std::size_t center = t * stride;
    idx.push_back(center == 0 ? 0 : center - 1);
    idx.push_back(std::min(center, T - 1));
    idx.push_back(std::min(center + 1, T - 1));
  }
  Tensor windows = reshape(rows(x, idx), {Tout, 3 * C});
  return add(matmul(windows, w), b);
}

GmmVae::GmmVae(const VaeConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  if (cfg.stride == 0 || cfg.latent_dim == 0 || cfg.feat_dim == 0) {
    throw ContractError("GmmVae: invalid config");
  }
  if (cfg.lambda < 0.0) throw ContractError("GmmVae: lambda < 0");
  const std::size_t F = cfg.feat_dim, D = cfg.latent_dim, W = cfg.hidden;
  ew1_ = init_weight(3 * F, W, init_rng);
  eb1_ = init_bias(W);
  ew2_ = init_weight(3 * W, W, init_rng);
  eb2_ = init_bias(W);
  ew3_ = init_weight(3 * W, D, init_rng);
  eb3_ = init_bias(D);
  dw1_ = init_weight(3 * D, W, init_rng);
  db1_ = init_bias(W);
  dw2_ = init_weight(3 * W, W, init_rng);
  db2_ = init_bias(W);
  dw3_ = init_weight(3 * W, F, init_rng);
  db3_ = init_bias(F);
  prior_ = make_gmm_prior(cfg.prior, D, init_rng);
}

Tensor GmmVae::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != cfg_.feat_dim) {
    throw ContractError("encode: input must be {T,F}");
  }
  if (x.shape()[0] == 0) throw ContractError("encode: empty input");
  Tensor h = tanh(conv1d(x, ew1_, eb1_, cfg_.stride));
  h = tanh(conv1d(h, ew2_, eb2_, 1));
  return conv1d(h, ew3_, eb3_, 1);
}

Tensor GmmVae::decode(const Tensor& h, std::size_t t) const {
  if (h.rank() != 2 || h.shape()[1] != cfg_.latent_dim) {
    throw ContractError("decode: input must be {M,D}");
  }
  const std::size_t M = h.shape()[0];
  std::vector<std::size_t> up;
  up.reserve(M * cfg_.stride);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t r = 0; r < cfg_.stride; ++r) up.push_back(m);
  }
  Tensor y = rows(h, up);
  y = tanh(conv1d(y, dw1_, db1_, 1));
  y = tanh(conv1d(y, dw2_, db2_, 1));
  y = conv1d(y, dw3_, db3_, 1);
  if (t > y.shape()[0]) throw ContractError("decode: target length too long");
  return t == y.shape()[0] ? y : slice(y, 0, 0, t);
}

GmmVae::Loss GmmVae::loss(const Tensor& x, Rng* noise_rng) const {
  const std::size_t T = x.shape()[0];
  Tensor h = encode(x);
  Tensor xhat = decode(h, T);
  Tensor diff = sub(x, xhat);
  Tensor recon = mean(mul(diff, diff));

  Tensor reg;
  if (cfg_.lambda == 0.0) {
    reg = Tensor::scalar(0.0);
  } else {
    Tensor hr = h;
    if (noise_rng != nullptr && cfg_.prior.posterior_noise > 0.0) {
      Tensor eta = sample_standard_normal(*noise_rng, h.shape());
      hr = add(h, mul_scalar(eta, cfg_.prior.posterior_noise));
    }
    Tensor ld = gmm_log_density_rows(hr, prior_);  // per latent frame
    reg = mul_scalar(mean(ld), -cfg_.lambda);
  }
  return {add(recon, reg), recon, reg};
}

NamedParams GmmVae::parameters() {
  NamedParams p = {
      {"enc.w1", ew1_}, {"enc.b1", eb1_}, {"enc.w2", ew2_}, {"enc.b2", eb2_},
      {"enc.w3", ew3_}, {"enc.b3", eb3_}, {"dec.w1", dw1_}, {"dec.b1", db1_},
      {"dec.w2", dw2_}, {"dec.b2", db2_}, {"dec.w3", dw3_}, {"dec.b3", db3_},
  };
  if (prior_.means.requires_grad()) {
    p.emplace_back("prior.means", prior_.means);
  }
  return p;
}

}  // namespace gmlab
