#include "gmlab/align.hpp"

#include <cmath>
#include <string>

namespace gmlab {

const char* align_mode_name(AlignMode m) {
  switch (m) {
    case AlignMode::st_gumbel: return "st_gumbel";
    case AlignMode::gumbel: return "gumbel";
    case AlignMode::noise: return "noise";
    case AlignMode::soft: return "soft";
    case AlignMode::cross: return "cross";
  }
  return "?";
}

std::optional<AlignMode> parse_align_mode(const std::string& name) {
  if (name == "st_gumbel") return AlignMode::st_gumbel;
  if (name == "gumbel") return AlignMode::gumbel;
  if (name == "noise") return AlignMode::noise;
  if (name == "soft") return AlignMode::soft;
  if (name == "cross") return AlignMode::cross;
  return std::nullopt;
}

Tensor energies(const Tensor& H, const Tensor& Y) {
  if (H.rank() != 2 || Y.rank() != 2 || H.shape()[1] != Y.shape()[1]) {
    throw ContractError("energies: H and Y must be 2-D with matching dim");
  }
  return matmul(H, transpose(Y));
}

Tensor clamp_stay(const Tensor& p) {
  const std::size_t J = p.shape().back();
  std::vector<double> mask(J, 1.0), last(J, 0.0);
  mask[J - 1] = 0.0;
  last[J - 1] = 1.0;
  return add(mul(p, Tensor::constant({J}, std::move(mask))),
             Tensor::constant({J}, std::move(last)));
}

Tensor soft_expected_alignment(const Tensor& p) {
  if (p.rank() != 2) throw ContractError("soft_expected_alignment: p not 2-D");
  for (double v : p.values()) {
    if (v < 0.0 || v > 1.0) {
      throw ContractError("soft_expected_alignment: p outside [0,1]");
    }
  }
  const std::size_t I = p.shape()[0], J = p.shape()[1];
  Tensor pe = clamp_stay(p);
  std::vector<Tensor> out_rows;
  Tensor alpha = reshape(Tensor::one_hot(J, 0), {1, J});
  out_rows.push_back(alpha);
  for (std::size_t i = 1; i < I; ++i) {
    Tensor prow = slice(pe, 0, i, 1);  // {1,J}
    Tensor stay = mul(alpha, prow);
    Tensor advance = shift_last(mul(alpha, sub(Tensor::ones({1, J}), prow)));
    alpha = add(stay, advance);
    out_rows.push_back(alpha);
  }
  return I == 1 ? out_rows[0] : concat(out_rows, 0);
}

std::vector<std::vector<double>> brute_force_expected_alignment(
    const std::vector<std::vector<double>>& p) {
  const std::size_t I = p.size();
  if (I == 0) throw ContractError("brute_force: empty p");
  const std::size_t J = p[0].size();
  if (I > 6 || J > 6) {
    throw ContractError("brute_force: instance too large to enumerate");
  }
  for (const auto& row : p) {
    if (row.size() != J) throw ContractError("brute_force: ragged p");
  }
  std::vector<std::vector<double>> marg(I, std::vector<double>(J, 0.0));
  // DFS over stay/advance decision sequences, stay forced at J-1
  struct Walker {
    const std::vector<std::vector<double>>& p;
    std::vector<std::vector<double>>& marg;
    std::size_t I, J;
    void walk(std::size_t i, std::size_t pos, double w) {
      marg[i][pos] += w;
      if (i + 1 == I) return;
      if (pos == J - 1) {
        walk(i + 1, pos, w);
        return;
      }
      const double stay = p[i + 1][pos];
      if (stay > 0.0) walk(i + 1, pos, w * stay);
      if (stay < 1.0) walk(i + 1, pos + 1, w * (1.0 - stay));
    }
  };
  Walker{p, marg, I, J}.walk(0, 0, 1.0);
  return marg;
}

AlignSample sample_alignment(const Tensor& e, double s, Rng& rng,
                             AlignMode mode) {
  if (mode == AlignMode::soft || mode == AlignMode::cross) {
    throw ContractError("sample_alignment: soft/cross modes do not sample");
  }
  if (s <= 0.0) throw ContractError("sample_alignment: temperature s <= 0");
  const Shape& shape = e.shape();
  const std::size_t n = e.size();
  AlignSample out;

  if (mode == AlignMode::noise) {
    Tensor eta = sample_standard_normal(rng, shape);
    out.u = sigmoid(add(e, eta));
    out.u_backward = out.u;
    return out;
  }

  // Shared Gumbel pair per cell: the binarized logit is a Gumbel-max
  // Bernoulli(p) draw, and the relaxed sigmoid converges to it as s -> 0.
  std::vector<double> diff(n);
  for (auto& d : diff) d = rng.gumbel01() - rng.gumbel01();
  Tensor g = Tensor::constant(shape, diff);
  Tensor relaxed = sigmoid(mul_scalar(add(e, g), 1.0 / s));
  out.u_backward = relaxed;

  if (mode == AlignMode::gumbel) {
    out.u = relaxed;
    return out;
  }

  out.u_forward.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.u_forward[k] = (e.values()[k] + diff[k] > 0.0) ? 1.0 : 0.0;
  }
  out.u = straight_through(out.u_forward, relaxed);
  return out;
}

Tensor align_update(const Tensor& alpha_prev, const Tensor& u_row) {
  if (alpha_prev.shape() != u_row.shape()) {
    throw ContractError("align_update: shape mismatch");
  }
  Tensor u_eff = clamp_stay(u_row);
  Tensor ones = Tensor::ones(u_row.shape());
  return add(mul(alpha_prev, u_eff),
             shift_last(mul(alpha_prev, sub(ones, u_eff))));
}

Tensor hard_align_step(const Tensor& alpha_prev, const Tensor& u_row) {
  bool one_seen = false;
  for (double v : alpha_prev.values()) {
    if (v == 1.0) {
      if (one_seen) throw ContractError("hard_align_step: alpha not one-hot");
      one_seen = true;
    } else if (v != 0.0) {
      throw ContractError("hard_align_step: alpha not one-hot");
    }
  }
  if (!one_seen) throw ContractError("hard_align_step: alpha not one-hot");
  return align_update(alpha_prev, u_row);
}

Tensor context(const Tensor& Y, const Tensor& alpha, const Tensor& h_i) {
  if (Y.rank() != 2 || alpha.size() != Y.shape()[0] ||
      h_i.size() != Y.shape()[1]) {
    throw ContractError("context: shape mismatch");
  }
  Tensor flat_alpha =
      alpha.rank() == 1 ? alpha : reshape(alpha, {alpha.size()});
  Tensor flat_h = h_i.rank() == 1 ? h_i : reshape(h_i, {h_i.size()});
  return add(matvec(transpose(Y), flat_alpha), flat_h);
}

double temperature_schedule(std::size_t step, std::size_t total, double s_hi,
                            double s_lo) {
  if (total == 0) throw ContractError("temperature_schedule: total = 0");
  if (step > total) throw ContractError("temperature_schedule: step > total");
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return s_hi * std::pow(s_lo / s_hi, t);
}

std::vector<std::size_t> sample_hard_trace(
    const std::vector<std::vector<double>>& p, Rng& rng, bool greedy) {
  const std::size_t I = p.size();
  if (I == 0) throw ContractError("sample_hard_trace: empty p");
  const std::size_t J = p[0].size();
  std::vector<std::size_t> trace(I, 0);
  std::size_t pos = 0;
  for (std::size_t i = 1; i < I; ++i) {
    bool stay;
    if (pos == J - 1) {
      stay = true;
    } else if (greedy) {
      stay = p[i][pos] >= 0.5;
    } else {
      stay = rng.bernoulli(p[i][pos]) == 1.0;
    }
    if (!stay) ++pos;
    trace[i] = pos;
  }
  return trace;
}

}  // namespace gmlab
