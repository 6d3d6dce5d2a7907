#include "gmlab/mdn.hpp"

#include <cmath>

namespace gmlab {

std::size_t mdn_raw_size(const MdnConfig& cfg) {
  const std::size_t N = cfg.mixtures, D = cfg.dim;
  if (cfg.regression) return D;
  if (cfg.cov_type == CovType::diagonal) return N + N * D + N * D;
  return N + N * D + N * (D * (D + 1)) / 2;
}

MdnOutput mdn_parameterize(const Tensor& raw, const MdnConfig& cfg) {
  if (raw.rank() != 1 || raw.size() != mdn_raw_size(cfg)) {
    throw ContractError("mdn_parameterize: raw length " +
                        std::to_string(raw.size()) + " != expected " +
                        std::to_string(mdn_raw_size(cfg)));
  }
  const std::size_t N = cfg.mixtures, D = cfg.dim;
  MdnOutput out;
  out.cfg = cfg;

  if (cfg.regression) {
    out.means = reshape(raw, {1, D});
    out.log_weights = Tensor::zeros({1});
    out.weights = Tensor::ones({1});
    out.scales = Tensor::ones({1, D});
    return out;
  }

  Tensor logits = slice(raw, 0, 0, N);
  out.log_weights = log_softmax_last(logits);
  out.weights = softmax_last(logits);
  out.means = reshape(slice(raw, 0, N, N * D), {N, D});

  if (cfg.cov_type == CovType::diagonal) {
    Tensor pre = reshape(slice(raw, 0, N + N * D, N * D), {N, D});
    out.scales = add_scalar(softplus(pre), cfg.scale_floor);
  } else {
    const std::size_t tri = D * (D + 1) / 2;
    std::size_t off = N + N * D;
    for (std::size_t n = 0; n < N; ++n) {
      Tensor packed = slice(raw, 0, off, tri);
      off += tri;
      // row d of the factor: d off-diagonal entries, softplus'd diagonal,
      // zeros above
      std::vector<Tensor> rows_out;
      std::size_t p = 0;
      for (std::size_t d = 0; d < D; ++d) {
        std::vector<Tensor> pieces;
        if (d > 0) pieces.push_back(slice(packed, 0, p, d));
        pieces.push_back(
            add_scalar(softplus(slice(packed, 0, p + d, 1)), cfg.scale_floor));
        if (d + 1 < D) pieces.push_back(Tensor::zeros({D - d - 1}));
        p += d + 1;
        rows_out.push_back(reshape(
            pieces.size() == 1 ? pieces[0] : concat(pieces, 0), {1, D}));
      }
      out.chol.push_back(concat(rows_out, 0));
    }
  }
  return out;
}

Tensor mdn_loss(const Tensor& target, const MdnOutput& out) {
  const std::size_t D = out.cfg.dim;
  if (target.rank() != 1 || target.size() != D) {
    throw ContractError("mdn_loss: target dimension mismatch");
  }
  if (out.cfg.regression) {
    Tensor diff = sub(reshape(out.means, {D}), target);
    // |x| via sign constant; gradient at 0 taken as 0
    std::vector<double> sgn(D);
    for (std::size_t i = 0; i < D; ++i) {
      const double d = diff.values()[i];
      sgn[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    return mean(mul(diff, Tensor::constant({D}, std::move(sgn))));
  }
  Tensor ld = mixture_log_density_rows(reshape(target, {1, D}),
                                       out.log_weights, out.means,
                                       out.cfg.cov_type, out.scales, out.chol);
  return neg(reshape(ld, {1}));
}

std::vector<double> mdn_sample_frame(const MdnOutput& out, double temperature,
                                     Rng& rng) {
  if (temperature < 0.0) {
    throw ContractError("mdn_sample_frame: negative temperature");
  }
  const std::size_t N = out.cfg.mixtures, D = out.cfg.dim;
  const auto& means = out.means.values();

  if (out.cfg.regression) {
    return {means.begin(), means.begin() + D};
  }

  const auto& lw = out.log_weights.values();
  std::size_t c = 0;
  if (temperature == 0.0) {
    for (std::size_t n = 1; n < N; ++n) {
      if (lw[n] > lw[c]) c = n;
    }
    return {means.begin() + c * D, means.begin() + (c + 1) * D};
  }

  // softmax of logits / temperature
  std::vector<double> probs(N);
  double mx = lw[0] / temperature;
  for (std::size_t n = 1; n < N; ++n) mx = std::max(mx, lw[n] / temperature);
  double z = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    probs[n] = std::exp(lw[n] / temperature - mx);
    z += probs[n];
  }
  for (auto& pr : probs) pr /= z;
  c = rng.categorical(probs);

  std::vector<double> frame(means.begin() + c * D, means.begin() + (c + 1) * D);
  if (out.cfg.cov_type == CovType::diagonal) {
    const auto& sc = out.scales.values();
    for (std::size_t d = 0; d < D; ++d) {
      frame[d] += temperature * sc[c * D + d] * rng.standard_normal();
    }
  } else {
    std::vector<double> eps(D);
    for (auto& e : eps) e = rng.standard_normal();
    const auto& Lc = out.chol[c].values();
    for (std::size_t i = 0; i < D; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += Lc[i * D + j] * eps[j];
      frame[i] += temperature * s;
    }
  }
  return frame;
}

Tensor stop_loss(const Tensor& logits, const std::vector<double>& is_last,
                 double pos_weight) {
  if (logits.rank() != 1 || logits.size() != is_last.size()) {
    throw ContractError("stop_loss: length mismatch");
  }
  const std::size_t T = is_last.size();
  std::vector<double> w(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (is_last[t] != 0.0 && is_last[t] != 1.0) {
      throw ContractError("stop_loss: is_last must be binary");
    }
    w[t] = is_last[t] == 1.0 ? pos_weight : 1.0;
  }
  Tensor y = Tensor::constant({T}, is_last);
  Tensor wt = Tensor::constant({T}, std::move(w));
  // BCE with logits: softplus(x) - x*y
  Tensor bce = sub(softplus(logits), mul(logits, y));
  return mul_scalar(sum(mul(wt, bce)), 1.0 / static_cast<double>(T));
}

GmmParams mdn_to_gmm(const MdnOutput& out) {
  GmmParams p;
  p.weights = out.weights;
  p.means = out.means;
  p.cov_type = out.cfg.cov_type;
  p.scales = out.scales;
  p.chol = out.chol;
  if (out.cfg.regression) p.cov_type = CovType::diagonal;
  return p;
}

}  // namespace gmlab
