#include "bdconv/ambiguity.hpp"

#include <cmath>
#include <limits>

#include "bdconv/conditionals.hpp"
#include "bdconv/distributions.hpp"
#include "bdconv/error.hpp"

namespace bdconv {

void ScaleMoveConfig::validate() const {
  if (!(sigma_alpha_sq > 0.0)) throw InvalidArgument("ScaleMoveConfig: sigma_alpha_sq must be positive");
}

double scale_acceptance_probability(const ParameterState& state, double alpha,
                                    const ScaleMoveConfig& config, double sigma_gamma_sq) {
  if (!(alpha > 0.0)) return 0.0;
  const double K = static_cast<double>(state.x.size());
  const double L = static_cast<double>(state.gamma.size());
  const double a2 = alpha * alpha;

  // Student-t marginal ratio of x after integrating the redrawn variances.
  double log_ratio = 0.0;
  for (Index n = 0; n < state.x.size(); ++n) {
    const double x2 = state.x[n] * state.x[n];
    log_ratio += std::log((x2 + 2.0 * state.beta_x) / (a2 * x2 + 2.0 * state.beta_x));
  }
  log_ratio *= state.alpha_x + 0.5;

  if (config.form == AcceptanceForm::published) {
    log_ratio += L * std::log(alpha) + (a2 * a2 - 1.0) / (2.0 * a2 * config.sigma_alpha_sq);
  } else {
    // q(1/alpha) / q(alpha) for q = N(center, sigma_alpha^2).
    const double c = config.center;
    const double inv = 1.0 / alpha;
    log_ratio += ((alpha - c) * (alpha - c) - (inv - c) * (inv - c)) / (2.0 * config.sigma_alpha_sq);
    // Jacobian of (x, gamma, alpha) -> (alpha x, gamma / alpha, 1 / alpha).
    log_ratio += (K - L - 2.0) * std::log(alpha);
    // gamma prior N(0, sigma_gamma^2 I) at gamma / alpha versus gamma.
    log_ratio -= state.gamma.squaredNorm() * (1.0 / a2 - 1.0) / (2.0 * sigma_gamma_sq);
  }
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

MoveResult scale_move(ParameterState& state, const ScaleMoveConfig& config, double sigma_gamma_sq,
                      Rng& rng) {
  const double alpha = config.center + std::sqrt(config.sigma_alpha_sq) * rng.normal();
  MoveResult result;
  result.acceptance_probability = scale_acceptance_probability(state, alpha, config, sigma_gamma_sq);
  if (result.acceptance_probability <= 0.0) return result;
  if (rng.uniform() >= result.acceptance_probability) return result;

  state.x *= alpha;
  state.gamma /= alpha;
  const double shape = state.alpha_x + 0.5;
  for (Index n = 0; n < state.x.size(); ++n)
    state.sigma_x_sq[n] = sample_inverse_gamma(shape, 0.5 * state.x[n] * state.x[n] + state.beta_x, rng);
  result.accepted = true;
  return result;
}

Vector circular_shift(const Vector& v, Index steps) {
  const Index n = v.size();
  Vector out(n);
  if (n == 0) return out;
  const Index k = ((steps % n) + n) % n;
  out.tail(n - k) = v.head(n - k);
  out.head(k) = v.tail(k);
  return out;
}

double shift_acceptance_probability(const Vector& x, const Vector& x_proposed,
                                    const Measurement& measurement, double sigma_v_sq,
                                    const ModelConfig& config, AcceptanceForm form) {
  const PrecisionGaussian now =
      gamma_conditional(gamma_system(measurement.y, x, config.A), sigma_v_sq, config.sigma_gamma_sq);
  const PrecisionGaussian next = gamma_conditional(gamma_system(measurement.y, x_proposed, config.A),
                                                   sigma_v_sq, config.sigma_gamma_sq);
  // log |Sigma*| - log |Sigma| = log |P| - log |P*|.
  const double log_det_ratio = now.log_det_precision() - next.log_det_precision();
  const double det_power = (form == AcceptanceForm::exact) ? 0.5 : 1.0;
  const double log_ratio = det_power * log_det_ratio + 0.5 * next.quadratic() - 0.5 * now.quadratic();
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

MoveResult shift_move(ParameterState& state, const Measurement& measurement,
                      const ModelConfig& config, Rng& rng, AcceptanceForm form, Index max_step) {
  if (max_step < 1) throw InvalidArgument("shift_move: max_step must be >= 1");
  Index direction = rng.uniform() < 0.5 ? -1 : 1;
  if (max_step > 1) direction *= 1 + static_cast<Index>(rng.uniform() * static_cast<double>(max_step));
  const Vector x_proposed = circular_shift(state.x, direction);

  const PrecisionGaussian now = gamma_conditional(gamma_system(measurement.y, state.x, config.A),
                                                  state.sigma_v_sq, config.sigma_gamma_sq);
  const PrecisionGaussian next = gamma_conditional(
      gamma_system(measurement.y, x_proposed, config.A), state.sigma_v_sq, config.sigma_gamma_sq);
  const double det_power = (form == AcceptanceForm::exact) ? 0.5 : 1.0;
  const double log_ratio = det_power * (now.log_det_precision() - next.log_det_precision()) +
                           0.5 * next.quadratic() - 0.5 * now.quadratic();

  MoveResult result;
  result.acceptance_probability = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  // gamma* is drawn whether or not the move is accepted so the random
  // stream does not depend on the outcome.
  const Vector gamma_proposed = next.sample(rng);
  if (rng.uniform() < result.acceptance_probability) {
    state.x = x_proposed;
    state.sigma_x_sq = circular_shift(state.sigma_x_sq, direction);
    state.gamma = gamma_proposed;
    result.accepted = true;
  }
  return result;
}

Vector delay(const Vector& v, Index n) {
  const Index len = v.size();
  Vector out = Vector::Zero(len);
  for (Index t = 0; t < len; ++t) {
    const Index src = t - n;
    if (src >= 0 && src < len) out[t] = v[src];
  }
  return out;
}

ScaleShiftCorrection correct_scale_shift(const Vector& h_true, const Vector& h_est,
                                         const Vector& x_est, Index max_shift) {
  if (h_true.size() != h_est.size())
    throw InvalidArgument("correct_scale_shift: pulses must have the same length");
  ScaleShiftCorrection best;
  double best_err = std::numeric_limits<double>::infinity();
  bool found = false;
  // Visit 0, -1, 1, -2, 2, ... so that ties resolve to the smallest |n|.
  for (Index k = 0; k <= 2 * max_shift; ++k) {
    const Index n = (k % 2 == 0) ? k / 2 : -(k + 1) / 2;
    const Vector s = delay(h_est, n);
    const double s2 = s.squaredNorm();
    if (!(s2 > 0.0)) continue;
    const double a = h_true.dot(s) / s2;
    const double err = (h_true - a * s).squaredNorm();
    if (!found || err < best_err) {
      best_err = err;
      best.a = a;
      best.n = n;
      found = true;
    }
  }
  if (!found) throw InvalidArgument("correct_scale_shift: estimated pulse is identically zero");
  if (best.a == 0.0) throw InvalidArgument("correct_scale_shift: pulses are orthogonal at every shift");
  best.h_corrected = best.a * delay(h_est, best.n);
  best.x_corrected = delay(x_est, -best.n) / best.a;
  return best;
}

AlignedEstimate aligned_posterior_mean(const Matrix& x_samples, const Matrix& h_samples,
                                       double burn_in_fraction, Index max_shift) {
  if (x_samples.rows() != h_samples.rows())
    throw InvalidArgument("aligned_posterior_mean: sample counts differ");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw InvalidArgument("aligned_posterior_mean: burn_in_fraction must lie in [0, 1)");
  const Index rows = x_samples.rows();
  const Index skip = static_cast<Index>(std::floor(static_cast<double>(rows) * burn_in_fraction));
  if (rows - skip < 1) throw InvalidArgument("aligned_posterior_mean: empty retention window");

  AlignedEstimate est;
  Vector ref = h_samples.row(rows - 1).transpose();
  for (int pass = 0; pass < 2; ++pass) {
    est.x = Vector::Zero(x_samples.cols());
    est.h = Vector::Zero(h_samples.cols());
    Index used = 0;
    for (Index i = skip; i < rows; ++i) {
      const Vector h = h_samples.row(i).transpose();
      const Vector x = x_samples.row(i).transpose();
      try {
        const ScaleShiftCorrection c = correct_scale_shift(ref, h, x, max_shift);
        est.x += c.x_corrected;
        est.h += c.h_corrected;
        ++used;
      } catch (const InvalidArgument&) {
        // zero or orthogonal pulse sample carries no alignment; skip it
      }
    }
    if (used == 0) throw InvalidArgument("aligned_posterior_mean: no sample could be aligned");
    est.x /= static_cast<double>(used);
    est.h /= static_cast<double>(used);
    ref = est.h;
  }
  return est;
}

}  // namespace bdconv
