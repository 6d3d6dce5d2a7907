#pragma once

#include <utility>
#include <vector>

#include "gmlab/rng.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

enum class CovType { diagonal, full };

/// Gaussian mixture parameters.  Full covariance is carried as lower
/// Cholesky factors with positive diagonal; upper entries must be zero.
struct GmmParams {
  Tensor weights;            // {L}, simplex
  Tensor means;              // {L,D}
  CovType cov_type = CovType::diagonal;
  Tensor scales;             // {L,D}, diagonal case
  std::vector<Tensor> chol;  // L factors {D,D}, full case

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.shape()[1]; }
  void validate() const;
};

struct PriorConfig {
  std::size_t mixtures = 1;
  bool learn_means_only = true;
  double lambda = 1.0;
  /// Optional Gaussian noise added to the latent before the regularizer
  /// (0 keeps the deterministic posterior reading).
  double posterior_noise = 0.0;
};

/// log sum_l pi_l N(row; mu_l, Sigma_l) per row of X {M,D}, via
/// log-sum-exp over components.  Differentiable w.r.t. X and all free
/// mixture parameters.
Tensor gmm_log_density_rows(const Tensor& X, const GmmParams& params);

/// Single-vector convenience wrapper; x is {D}, result {1}.
Tensor gmm_log_density(const Tensor& x, const GmmParams& params);

/// Internal form taking log-weights directly (used by the MDN head so
/// softmax and log fuse into a stable log-softmax).
Tensor mixture_log_density_rows(const Tensor& X, const Tensor& log_weights,
                                const Tensor& means, CovType cov_type,
                                const Tensor& scales,
                                const std::vector<Tensor>& chol);

/// Reparameterized sample: the component index is drawn from the weights
/// and treated as a constant; the within-component path is differentiable
/// w.r.t. the chosen mean and scale.
std::pair<Tensor, std::size_t> gmm_sample(const GmmParams& params, Rng& rng);

/// -lambda * log p_prior(h): the h-dependent part of the Monte-Carlo KL
/// under a point-mass posterior (the dropped posterior-entropy constant
/// does not affect training).
Tensor prior_regularizer(const Tensor& h, const GmmParams& prior,
                         double lambda);

/// Equal weights, identity covariance, means ~ 0.5 * N(0, I); means are
/// the only trainable piece when `learn_means_only` is set.
GmmParams make_gmm_prior(const PriorConfig& cfg, std::size_t dim, Rng& rng);

}  // namespace gmlab
