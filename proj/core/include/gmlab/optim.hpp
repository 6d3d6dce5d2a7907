#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gmlab/tensor.hpp"

namespace gmlab {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 1.0;  // global gradient norm
};

/// Adam with global-norm gradient clipping.  Parameters missing a grad
/// are treated as zero-gradient.  Clears all grads after the update.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Returns the pre-clip global gradient norm.
  double step(NamedParams& params);

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace gmlab
