// Independent verification oracles used only by the test suites.  Every
// oracle takes a deliberately different computational route than the
// library (linear-space sums, explicit matrix inversion, double loops).
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracles {

// Direct linear-space mixture density with diagonal scales: plain
// sum of pi_l * pdf_l, no log-sum-exp.
inline double gmm_log_density_diag(const std::vector<double>& x,
                                   const std::vector<double>& w,
                                   const std::vector<std::vector<double>>& mu,
                                   const std::vector<std::vector<double>>& sd) {
  const std::size_t D = x.size();
  double acc = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    double pdf = 1.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double z = (x[d] - mu[l][d]) / sd[l][d];
      pdf *= std::exp(-0.5 * z * z) /
             (sd[l][d] * std::sqrt(2.0 * 3.14159265358979323846));
    }
    acc += w[l] * pdf;
  }
  return std::log(acc);
}

// Full covariance: Sigma = L L^T built explicitly, inverted with
// Gauss-Jordan, determinant from the elimination pivots.
inline double gmm_log_density_full(
    const std::vector<double>& x, const std::vector<double>& w,
    const std::vector<std::vector<double>>& mu,
    const std::vector<std::vector<std::vector<double>>>& chol) {
  const std::size_t D = x.size();
  double acc = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    std::vector<std::vector<double>> sigma(D, std::vector<double>(D, 0.0));
    for (std::size_t i = 0; i < D; ++i) {
      for (std::size_t j = 0; j < D; ++j) {
        for (std::size_t k = 0; k <= std::min(i, j); ++k) {
          sigma[i][j] += chol[l][i][k] * chol[l][j][k];
        }
      }
    }
    // Gauss-Jordan inverse with partial pivoting
    std::vector<std::vector<double>> a = sigma;
    std::vector<std::vector<double>> inv(D, std::vector<double>(D, 0.0));
    for (std::size_t i = 0; i < D; ++i) inv[i][i] = 1.0;
    double det = 1.0;
    for (std::size_t c = 0; c < D; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < D; ++r) {
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      }
      if (piv != c) {
        std::swap(a[piv], a[c]);
        std::swap(inv[piv], inv[c]);
        det = -det;
      }
      det *= a[c][c];
      const double s = 1.0 / a[c][c];
      for (std::size_t j = 0; j < D; ++j) {
        a[c][j] *= s;
        inv[c][j] *= s;
      }
      for (std::size_t r = 0; r < D; ++r) {
        if (r == c) continue;
        const double f = a[r][c];
        for (std::size_t j = 0; j < D; ++j) {
          a[r][j] -= f * a[c][j];
          inv[r][j] -= f * inv[c][j];
        }
      }
    }
    double q = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      for (std::size_t j = 0; j < D; ++j) {
        q += (x[i] - mu[l][i]) * inv[i][j] * (x[j] - mu[l][j]);
      }
    }
    const double norm =
        std::pow(2.0 * 3.14159265358979323846, -0.5 * static_cast<double>(D)) /
        std::sqrt(det);
    acc += w[l] * norm * std::exp(-0.5 * q);
  }
  return std::log(acc);
}

// Entry-wise dot-product energies, naive double loop.
inline std::vector<std::vector<double>> energies(
    const std::vector<std::vector<double>>& H,
    const std::vector<std::vector<double>>& Y) {
  std::vector<std::vector<double>> e(H.size(),
                                     std::vector<double>(Y.size(), 0.0));
  for (std::size_t i = 0; i < H.size(); ++i) {
    for (std::size_t j = 0; j < Y.size(); ++j) {
      for (std::size_t d = 0; d < H[i].size(); ++d) {
        e[i][j] += H[i][d] * Y[j][d];
      }
    }
  }
  return e;
}

// c = Y^T alpha + h, naive loop.
inline std::vector<double> context(const std::vector<std::vector<double>>& Y,
                                   const std::vector<double>& alpha,
                                   const std::vector<double>& h) {
  std::vector<double> c = h;
  for (std::size_t j = 0; j < Y.size(); ++j) {
    for (std::size_t d = 0; d < h.size(); ++d) c[d] += alpha[j] * Y[j][d];
  }
  return c;
}

// Hand-summed weighted binary cross-entropy on logits.
inline double stop_bce(const std::vector<double>& logits,
                       const std::vector<double>& is_last, double pos_weight) {
  double acc = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const double p = 1.0 / (1.0 + std::exp(-logits[t]));
    const double term =
        is_last[t] == 1.0 ? -pos_weight * std::log(p) : -std::log(1.0 - p);
    acc += term;
  }
  return acc / static_cast<double>(logits.size());
}

}  // namespace oracles
