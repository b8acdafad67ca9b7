#pragma once

#include "bdconv/model.hpp"
#include "bdconv/rng.hpp"

namespace bdconv {

// Which acceptance expression a compensation move uses.
//   exact:     the Metropolis-Hastings ratio of the move as constructed,
//              including the change-of-variables and gamma-prior factors
//              (scale) and the square root on the determinant ratio (shift).
//   published: the closed forms as printed in the original derivation,
//              kept for comparison.
enum class AcceptanceForm { exact, published };

struct ScaleMoveConfig {
  double sigma_alpha_sq = 0.25;
  // Mean of the Gaussian scale proposal q(alpha) = N(alpha; center, sigma_alpha_sq).
  double center = 0.0;
  AcceptanceForm form = AcceptanceForm::exact;

  void validate() const;
};

struct MoveResult {
  bool accepted = false;
  double acceptance_probability = 0.0;
};

// Acceptance probability for replacing (x, gamma) by (alpha x, gamma / alpha)
// with sigma_x^2 redrawn from its conditional given alpha x.
// Proposals alpha <= 0 are rejected (probability 0).
double scale_acceptance_probability(const ParameterState& state, double alpha,
                                    const ScaleMoveConfig& config, double sigma_gamma_sq);

MoveResult scale_move(ParameterState& state, const ScaleMoveConfig& config, double sigma_gamma_sq,
                      Rng& rng);

// Circular shift by `steps` samples; positive moves toward higher indices.
Vector circular_shift(const Vector& v, Index steps);

// Acceptance probability for moving x to `x_proposed` (a circular shift of
// x) with gamma redrawn from p(gamma | y, x_proposed, sigma_v^2).
double shift_acceptance_probability(const Vector& x, const Vector& x_proposed,
                                    const Measurement& measurement, double sigma_v_sq,
                                    const ModelConfig& config,
                                    AcceptanceForm form = AcceptanceForm::exact);

// Shifts (x, sigma_x^2) circularly by d samples, d uniform on
// {-max_step, ..., -1, 1, ..., max_step}, and redraws gamma given x*.
MoveResult shift_move(ParameterState& state, const Measurement& measurement,
                      const ModelConfig& config, Rng& rng,
                      AcceptanceForm form = AcceptanceForm::exact, Index max_step = 1);

// Shift of a finite sequence by n samples with zero fill, same length:
// out[t] = v[t - n].
Vector delay(const Vector& v, Index n);

struct ScaleShiftCorrection {
  double a = 1.0;
  Index n = 0;
  Vector x_corrected;
  Vector h_corrected;
};

// Finds (a, n) minimizing ||h_true - a delay(h_est, n)|| over integer
// |n| <= max_shift, then returns x' = delay(x_est, -n) / a and
// h' = a delay(h_est, n).
ScaleShiftCorrection correct_scale_shift(const Vector& h_true, const Vector& h_est,
                                         const Vector& x_est, Index max_shift);

struct AlignedEstimate {
  Vector x;
  Vector h;
};

// Posterior mean over the retained rows (after discarding the first
// floor(rows * burn_in_fraction)) with every sample first mapped onto a common
// scale and shift: each (x_i, h_i) is replaced by its correct_scale_shift
// against a reference pulse. The reference starts at the last sample and is
// refreshed once with the aligned mean.
AlignedEstimate aligned_posterior_mean(const Matrix& x_samples, const Matrix& h_samples,
                                       double burn_in_fraction, Index max_shift);

}  // namespace bdconv
