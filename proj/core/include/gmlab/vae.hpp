#pragma once

#include <optional>

#include "gmlab/gmm.hpp"
#include "gmlab/optim.hpp"
#include "gmlab/rng.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

struct VaeConfig {
  std::size_t feat_dim = 16;    // F
  std::size_t latent_dim = 8;   // D
  std::size_t stride = 2;       // frames per latent (r)
  std::size_t hidden = 32;
  double lambda = 1.0;
  PriorConfig prior;
};

/// Windowed linear map of width 3 over the rows of x {T,C}; edge rows are
/// replicated for padding.  Output has ceil(T/stride) rows.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride);

/// Deterministic encoder/decoder pair trained with MSE reconstruction
/// plus the lambda-weighted mixture-prior regularizer.
class GmmVae {
 public:
  GmmVae(const VaeConfig& cfg, Rng& init_rng);

  Tensor encode(const Tensor& x) const;           // {T,F} -> {ceil(T/r),D}
  Tensor decode(const Tensor& h, std::size_t t) const;  // -> {t,F}

  struct Loss {
    Tensor total, recon, reg;
  };
  /// `noise_rng` drives the optional posterior-noise knob; pass nullptr
  /// for the deterministic reading.
  Loss loss(const Tensor& x, Rng* noise_rng = nullptr) const;

  NamedParams parameters();
  const GmmParams& prior() const { return prior_; }
  const VaeConfig& config() const { return cfg_; }

 private:
  VaeConfig cfg_;
  // encoder: F -> hidden (stride r) -> hidden -> D
  Tensor ew1_, eb1_, ew2_, eb2_, ew3_, eb3_;
  // decoder: D -> hidden -> hidden -> F after nearest upsampling
  Tensor dw1_, db1_, dw2_, db2_, dw3_, db3_;
  GmmParams prior_;
};

}  // namespace gmlab
