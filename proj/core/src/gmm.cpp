#include "gmlab/gmm.hpp"

#include <cmath>
#include <numbers>

namespace gmlab {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

void GmmParams::validate() const {
  const std::size_t L = components();
  if (means.rank() != 2 || means.shape()[0] != L) {
    throw ContractError("GmmParams: means must be {L,D}");
  }
  double wsum = 0.0;
  for (double w : weights.values()) {
    if (w < 0.0) throw ContractError("GmmParams: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12) {
    throw ContractError("GmmParams: weights must sum to 1");
  }
  if (cov_type == CovType::diagonal) {
    if (scales.shape() != means.shape()) {
      throw ContractError("GmmParams: scales must match means shape");
    }
    for (double s : scales.values()) {
      if (s <= 0.0) throw ContractError("GmmParams: scales must be positive");
    }
  } else {
    if (chol.size() != L) throw ContractError("GmmParams: missing chol factors");
    const std::size_t D = dim();
    for (const auto& c : chol) {
      if (c.shape() != Shape{D, D}) {
        throw ContractError("GmmParams: chol factor shape mismatch");
      }
      for (std::size_t i = 0; i < D; ++i) {
        if (c.values()[i * D + i] <= 0.0) {
          throw ContractError("GmmParams: chol diagonal must be positive");
        }
      }
    }
  }
}

Tensor mixture_log_density_rows(const Tensor& X, const Tensor& log_weights,
                                const Tensor& means, CovType cov_type,
                                const Tensor& scales,
                                const std::vector<Tensor>& chol) {
  if (X.rank() != 2) throw ContractError("gmm_log_density: X must be 2-D");
  const std::size_t D = means.shape()[1];
  if (X.shape()[1] != D) {
    throw ContractError("gmm_log_density: dimension mismatch");
  }
  const std::size_t L = log_weights.size();
  const std::size_t M = X.shape()[0];
  const double norm_const = 0.5 * static_cast<double>(D) * kLogTwoPi;

  std::vector<Tensor> comps;
  comps.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    Tensor mu = slice(means, 0, l, 1);        // {1,D}
    Tensor diff = sub(X, mu);                 // {M,D}
    Tensor lw = slice(log_weights, 0, l, 1);  // {1}
    Tensor comp;                              // {M}
    if (cov_type == CovType::diagonal) {
      Tensor sc = slice(scales, 0, l, 1);     // {1,D}
      Tensor z = divide(diff, sc);
      Tensor quad = sum_last(mul(z, z));      // {M}
      Tensor logdet = sum(log(sc));           // {1}
      comp = sub(mul_scalar(quad, -0.5), add_scalar(logdet, norm_const));
    } else {
      Tensor Z = trisolve_lower(chol[l], transpose(diff));  // {D,M}
      Tensor quad = sum_last(transpose(mul(Z, Z)));         // {M}
      Tensor logdet = sum(log(diag_part(chol[l])));         // {1}
      comp = sub(mul_scalar(quad, -0.5), add_scalar(logdet, norm_const));
    }
    comps.push_back(reshape(add(comp, lw), {M, 1}));
  }
  Tensor stacked = (L == 1) ? comps[0] : concat(comps, 1);  // {M,L}
  return logsumexp_last(stacked);                           // {M}
}

Tensor gmm_log_density_rows(const Tensor& X, const GmmParams& params) {
  params.validate();
  return mixture_log_density_rows(X, log(params.weights), params.means,
                                  params.cov_type, params.scales, params.chol);
}

Tensor gmm_log_density(const Tensor& x, const GmmParams& params) {
  if (x.rank() != 1) throw ContractError("gmm_log_density: x must be 1-D");
  return gmm_log_density_rows(reshape(x, {1, x.size()}), params);
}

std::pair<Tensor, std::size_t> gmm_sample(const GmmParams& params, Rng& rng) {
  params.validate();
  const std::size_t D = params.dim();
  const std::size_t c = rng.categorical(params.weights.values());
  Tensor eps = sample_standard_normal(rng, {D});
  Tensor mu = reshape(slice(params.means, 0, c, 1), {D});
  Tensor x;
  if (params.cov_type == CovType::diagonal) {
    Tensor sc = reshape(slice(params.scales, 0, c, 1), {D});
    x = add(mu, mul(sc, eps));
  } else {
    x = add(mu, matvec(params.chol[c], eps));
  }
  return {x, c};
}

Tensor prior_regularizer(const Tensor& h, const GmmParams& prior,
                         double lambda) {
  if (lambda < 0.0) throw ContractError("prior_regularizer: lambda < 0");
  if (lambda == 0.0) return Tensor::scalar(0.0);
  return mul_scalar(gmm_log_density(h, prior), -lambda);
}

GmmParams make_gmm_prior(const PriorConfig& cfg, std::size_t dim, Rng& rng) {
  const std::size_t L = cfg.mixtures;
  if (L == 0) throw ContractError("make_gmm_prior: zero mixtures");
  GmmParams p;
  p.weights = Tensor::constant({L}, std::vector<double>(L, 1.0 / L));
  std::vector<double> mu(L * dim);
  for (auto& m : mu) m = 0.5 * rng.standard_normal();
  p.means = cfg.learn_means_only ? Tensor::param({L, dim}, std::move(mu))
                                 : Tensor::constant({L, dim}, std::move(mu));
  p.cov_type = CovType::diagonal;
  p.scales = Tensor::ones({L, dim});
  return p;
}

}  // namespace gmlab
