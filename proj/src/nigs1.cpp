#include "bdconv/nigs1.hpp"

#include <cmath>
#include <limits>

#include "bdconv/conditionals.hpp"
#include "bdconv/error.hpp"
#include "step_guard.hpp"

namespace bdconv {

void AmbiguityMoves::validate() const {
  scale.validate();
  if (shift_max_step < 1) throw InvalidArgument("AmbiguityMoves: shift_max_step must be >= 1");
}

void Nigs1Config::validate() const {
  slice.validate();
  moves.validate();
  if (iterations < 1) throw InvalidArgument("Nigs1Config: iterations must be >= 1");
}

ParameterState initialize_state(const Measurement& measurement, const ModelConfig& config, Rng& rng) {
  config.validate();
  if (measurement.y.size() != config.N()) throw InvalidArgument("initialize_state: y must have length N");
  ParameterState s;
  s.alpha_x = sample_inverse_gamma(2.0, 1.0, rng);
  s.beta_x = sample_inverse_gamma(2.0, 1.0, rng);
  s.sigma_x_sq.resize(config.K);
  for (Index n = 0; n < config.K; ++n) s.sigma_x_sq[n] = sample_inverse_gamma(s.alpha_x, s.beta_x, rng);
  s.gamma.resize(config.L);
  const double sg = std::sqrt(config.sigma_gamma_sq);
  for (Index l = 0; l < config.L; ++l) s.gamma[l] = sg * rng.normal();
  const Vector& y = measurement.y;
  const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size());
  s.sigma_v_sq = var_y > 0.0 ? 0.1 * var_y : 1.0;
  s.x = Vector::Zero(config.K);
  step4_sample_x(s, measurement, config, rng);
  return s;
}

double alpha_x_log_target(double alpha_x, const Vector& sigma_x_sq, double beta_x, const Hyperpriors& hyper) {
  if (!(alpha_x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double K = static_cast<double>(sigma_x_sq.size());
  const double sum_log = sigma_x_sq.array().log().sum();
  return K * alpha_x * std::log(beta_x) - K * std::lgamma(alpha_x) - (alpha_x + 1.0) * sum_log +
         (hyper.alpha_shape - 1.0) * std::log(alpha_x) - hyper.alpha_rate * alpha_x;
}

void step1_sample_alpha_x(ParameterState& state, const SliceSamplerConfig& slice, Rng& rng,
                          const Hyperpriors& hyper) {
  const double K = static_cast<double>(state.sigma_x_sq.size());
  const double sum_log = state.sigma_x_sq.array().log().sum();
  const double log_beta = std::log(state.beta_x);
  const auto target = [&](double a) {
    if (!(a > 0.0)) return -std::numeric_limits<double>::infinity();
    return K * a * log_beta - K * std::lgamma(a) - (a + 1.0) * sum_log + (hyper.alpha_shape - 1.0) * std::log(a) -
           hyper.alpha_rate * a;
  };
  state.alpha_x = slice_sample_log_scale(target, state.alpha_x, slice, rng);
}

void step2_sample_beta_x(ParameterState& state, Rng& rng, const Hyperpriors& hyper) {
  const double K = static_cast<double>(state.sigma_x_sq.size());
  // Rate parameterization: the conditional is proportional to
  // beta^(K alpha + b_shape - 1) exp(-beta (sum 1/sigma^2 + b_rate)).
  state.beta_x = sample_gamma(K * state.alpha_x + hyper.beta_shape,
                              state.sigma_x_sq.array().inverse().sum() + hyper.beta_rate, rng);
}

void step3_sample_sigma_x(ParameterState& state, Rng& rng) {
  const double shape = state.alpha_x + 0.5;
  for (Index n = 0; n < state.x.size(); ++n)
    state.sigma_x_sq[n] = sample_inverse_gamma(shape, 0.5 * state.x[n] * state.x[n] + state.beta_x, rng);
}

void step4_sample_x(ParameterState& state, const Measurement& measurement,
                    const ModelConfig& config, Rng& rng) {
  const Vector h = config.A * state.gamma;
  state.x = sample_x_posterior(x_posterior_band(measurement.y, h, state.sigma_x_sq, state.sigma_v_sq), rng);
}

void step5_sample_gamma(ParameterState& state, const Measurement& measurement,
                        const ModelConfig& config, Rng& rng) {
  const GammaSystem system = gamma_system(measurement.y, state.x, config.A);
  state.gamma = gamma_conditional(system, state.sigma_v_sq, config.sigma_gamma_sq).sample(rng);
}

void step6_sample_sigma_v(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, Rng& rng) {
  const double rss = residual_norm_sq(measurement.y, state.x, config.A * state.gamma);
  if (!(rss > 0.0))
    throw InvalidArgument("step6_sample_sigma_v: zero residual gives a degenerate inverse gamma");
  state.sigma_v_sq = sample_inverse_gamma(0.5 * static_cast<double>(config.N()) + config.hyper.sigma_v_shape,
                                          0.5 * rss + config.hyper.sigma_v_scale, rng);
}

IterationReport run_ambiguity_moves(ParameterState& state, const Measurement& measurement,
                                    const ModelConfig& config, const AmbiguityMoves& moves, Rng& rng) {
  IterationReport report;
  report.moves_ran = true;
  report.scale = scale_move(state, moves.scale, config.sigma_gamma_sq, rng);
  report.shift = shift_move(state, measurement, config, rng, moves.shift_form, moves.shift_max_step);
  return report;
}

IterationReport nigs1_iterate(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const Nigs1Config& nigs, Rng& rng) {
  const detail::StepRunner run{nigs.on_step};
  run("step1_sample_alpha_x", [&] { step1_sample_alpha_x(state, nigs.slice, rng, config.hyper); });
  run("step2_sample_beta_x", [&] { step2_sample_beta_x(state, rng, config.hyper); });
  run("step3_sample_sigma_x", [&] { step3_sample_sigma_x(state, rng); });
  run("step4_sample_x", [&] { step4_sample_x(state, measurement, config, rng); });
  run("step5_sample_gamma", [&] { step5_sample_gamma(state, measurement, config, rng); });
  run("step6_sample_sigma_v", [&] { step6_sample_sigma_v(state, measurement, config, rng); });
  IterationReport report;
  if (nigs.moves.enabled) {
    run("ambiguity_moves",
        [&] { report = run_ambiguity_moves(state, measurement, config, nigs.moves, rng); });
  }
  return report;
}

}  // namespace bdconv
