#include "gmlab/optim.hpp"

#include <cmath>

namespace gmlab {

double Adam::step(NamedParams& params) {
  if (m_.empty()) {
    for (auto& [name, p] : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ContractError("Adam: parameter set changed between steps");
  }

  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = (cfg_.clip > 0.0 && norm > cfg_.clip)
                           ? cfg_.clip / norm
                           : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k].second;
    auto& vals = p.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    const std::vector<double>* gp = p.has_grad() ? &p.grad() : nullptr;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = gp ? (*gp)[i] * scale : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
  return norm;
}

}  // namespace gmlab
