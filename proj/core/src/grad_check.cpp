#include "gmlab/grad_check.hpp"

#include <cmath>

namespace gmlab {

namespace {

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double eps) {
  Tensor leaf = Tensor::param(x.shape(), x.values());
  Tensor y0 = f(leaf);
  Tensor y1 = f(leaf);
  if (y0.values() != y1.values()) {
    throw ContractError("grad_check: f is not deterministic");
  }
  Tensor y = f(leaf);
  backward(y);
  std::vector<double> analytic =
      leaf.has_grad() ? leaf.grad() : std::vector<double>(leaf.size(), 0.0);

  double worst = 0.0;
  std::vector<double> point = x.values();
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f(Tensor::constant(x.shape(), point)).item();
    point[i] = saved - eps;
    const double dn = f(Tensor::constant(x.shape(), point)).item();
    point[i] = saved;
    const double numeric = (up - dn) / (2.0 * eps);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& params, double eps) {
  Tensor y0 = f();
  Tensor y1 = f();
  if (y0.values() != y1.values()) {
    throw ContractError("grad_check_params: f is not deterministic");
  }
  for (auto p : params) p.zero_grad();
  Tensor y = f();
  backward(y);

  double worst = 0.0;
  for (auto p : params) {
    std::vector<double> analytic =
        p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0);
    auto& vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + eps;
      const double up = f().item();
      vals[i] = saved - eps;
      const double dn = f().item();
      vals[i] = saved;
      const double numeric = (up - dn) / (2.0 * eps);
      worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace gmlab
