#pragma once

#include <vector>

#include "gmlab/gmm.hpp"
#include "gmlab/rng.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

struct MdnConfig {
  std::size_t mixtures = 3;
  std::size_t dim = 8;
  CovType cov_type = CovType::diagonal;
  /// Means-only head with an L1 loss; sampling returns the means.
  bool regression = false;
  double scale_floor = 1e-4;
};

/// Required length of the raw head vector for a config.
std::size_t mdn_raw_size(const MdnConfig& cfg);

/// Activated mixture parameters of one decoder step.
struct MdnOutput {
  MdnConfig cfg;
  Tensor log_weights;        // {N}
  Tensor weights;            // {N}
  Tensor means;              // {N,D}
  Tensor scales;             // {N,D}, diagonal
  std::vector<Tensor> chol;  // {D,D} per component, full
};

/// Split order is (weight logits, means, pre-scales); softmax on the
/// logits, softplus plus the floor on the scales.
MdnOutput mdn_parameterize(const Tensor& raw, const MdnConfig& cfg);

/// Negative mixture log-likelihood of the target frame (L1 mean error in
/// regression mode); differentiable end to end through the raw vector.
Tensor mdn_loss(const Tensor& target, const MdnOutput& out);

/// Temperature scales both the component logits and the within-component
/// noise; temperature 0 returns the argmax component's mean.
std::vector<double> mdn_sample_frame(const MdnOutput& out, double temperature,
                                     Rng& rng);

/// Weighted mean binary cross-entropy on per-step stop logits.
Tensor stop_loss(const Tensor& logits, const std::vector<double>& is_last,
                 double pos_weight = 5.0);

/// View the activated output as GmmParams (density checks, sampling).
GmmParams mdn_to_gmm(const MdnOutput& out);

}  // namespace gmlab
