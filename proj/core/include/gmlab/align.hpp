#pragma once

#include <optional>
#include <vector>

#include "gmlab/rng.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

/// Alignment sampling variants.  `p = sigmoid(e)` is the STAY probability
/// throughout: u = 1 keeps the current encoder position, u = 0 advances
/// by one.
enum class AlignMode { st_gumbel, gumbel, noise, soft, cross };

const char* align_mode_name(AlignMode m);
std::optional<AlignMode> parse_align_mode(const std::string& name);

/// e = H Y^T, fully parallel.
Tensor energies(const Tensor& H, const Tensor& Y);

/// Stay probabilities with the advance branch disabled at the last
/// encoder position (forces p = 1 in the last column so no probability
/// mass leaves the simplex).
Tensor clamp_stay(const Tensor& p);

/// Expected-alignment recursion on stay probabilities p {I,J}: row 0 is
/// the initial one-hot at position 0, row i applies the stay/advance
/// marginal update with p row i.  Rows sum to 1 under the boundary clamp.
Tensor soft_expected_alignment(const Tensor& p);

/// Exact marginals by enumerating every monotone path; refuses I or J
/// above 6.  Independent verification route for the recursion above.
std::vector<std::vector<double>> brute_force_expected_alignment(
    const std::vector<std::vector<double>>& p);

/// One Bernoulli/Gumbel alignment sample over the energy matrix.
struct AlignSample {
  Tensor u;                       // value used in the recursion
  std::vector<double> u_forward;  // binary draws (st_gumbel mode)
  Tensor u_backward;              // relaxed surrogate
};

/// Samples u from the stay probabilities with temperature s:
///   st_gumbel — binary forward, relaxed Gumbel-sigmoid backward
///   gumbel    — relaxed value used directly
///   noise     — sigmoid of energy plus pre-sigmoid Gaussian noise
AlignSample sample_alignment(const Tensor& e, double s, Rng& rng,
                             AlignMode mode = AlignMode::st_gumbel);

/// General stay/advance update: alpha_i = alpha.u + shift(alpha.(1-u)),
/// with the stay decision forced at the last position.
Tensor align_update(const Tensor& alpha_prev, const Tensor& u_row);

/// Hard-mode wrapper: validates the forward values of alpha_prev are
/// exactly one-hot.
Tensor hard_align_step(const Tensor& alpha_prev, const Tensor& u_row);

/// c_i = Y^T alpha + h_i.
Tensor context(const Tensor& Y, const Tensor& alpha, const Tensor& h_i);

/// Geometric interpolation from s_hi at step 0 down to s_lo at `total`.
double temperature_schedule(std::size_t step, std::size_t total,
                            double s_hi = 2.0, double s_lo = 0.1);

/// Sampled hard position trace for a stay-probability matrix; row 0 is
/// position 0.  `greedy` thresholds at 0.5 instead of sampling.
std::vector<std::size_t> sample_hard_trace(
    const std::vector<std::vector<double>>& p, Rng& rng, bool greedy = false);

}  // namespace gmlab
